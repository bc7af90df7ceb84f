"""
Test roster selection and training split recipes.

Every sampling step draws from a numpy generator seeded by
:func:`voicefair.utils.mix_seed` over the master seed, the fold and the group, so a
fold can be rebuilt on its own and groups can be processed in any order.
"""
from __future__ import annotations

__all__ = (
    "SplitConfig",
    "TestRoster",
    "TrainRecipe",
    "TrainItem",
    "TrainSplit",
    "fold_seed",
    "select_test_roster",
    "build_train_user_balanced",
    "build_train_unbalanced",
    "build_train_utterance_balanced",
    "build_train_split",
    "merge_language_splits",
)

import dataclasses
import enum
import functools
import logging
import types
from typing import Iterable
from typing import Mapping
from typing import Optional
from typing import Sequence

from voicefair import cfg
from voicefair.errors import SplitError
from voicefair.utils import format_rows
from voicefair.utils import make_rng
from voicefair.utils import mix_seed
from voicefair.utils import parse_rows
from .base import DatasetIndex
from .base import GroupKey

logger = logging.getLogger(__name__)

_MAX_SEED = 2**64


@dataclasses.dataclass(frozen=True)
class SplitConfig:
    seed: int
    test_users_per_group: int = cfg.test_users_per_group
    n_folds: int = cfg.n_folds
    split_age: int = cfg.split_age

    def __post_init__(self):
        if not 0 <= self.seed < _MAX_SEED:
            raise SplitError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        for name in ("test_users_per_group", "n_folds", "split_age"):
            value = getattr(self, name)
            if value < 1:
                raise SplitError(f"{name} must be a positive integer, got {value}")


def fold_seed(seed: int, fold: int) -> int:
    """
    Seed of the given fold, derived from the master seed.
    """
    return mix_seed(seed, "fold", fold)


@dataclasses.dataclass(frozen=True, eq=False)
class TestRoster:
    """
    Speakers held out for testing in one fold, listed per group.
    """

    fold_id: int
    members: Mapping[GroupKey, tuple[str, ...]]

    # not a pytest test class
    __test__ = False

    def __post_init__(self):
        lengths = {len(speakers) for speakers in self.members.values()}
        if len(lengths) > 1:
            raise SplitError(f"roster groups have different sizes {sorted(lengths)}")
        seen: set[str] = set()
        for speakers in self.members.values():
            for speaker_id in speakers:
                if speaker_id in seen:
                    raise SplitError(f"speaker '{speaker_id}' appears twice in the roster")
                seen.add(speaker_id)

    @classmethod
    def empty(cls, fold_id: int = 0) -> TestRoster:
        return cls(fold_id=fold_id, members=types.MappingProxyType({}))

    def __len__(self) -> int:
        return sum(len(speakers) for speakers in self.members.values())

    def __eq__(self, other) -> bool:
        if isinstance(other, TestRoster):
            return self.fold_id == other.fold_id and dict(self.members) == dict(
                other.members
            )
        return False

    @functools.cached_property
    def speaker_ids(self) -> frozenset[str]:
        return frozenset(
            speaker_id for speakers in self.members.values() for speaker_id in speakers
        )

    @functools.cached_property
    def group_of(self) -> Mapping[str, GroupKey]:
        return types.MappingProxyType(
            {
                speaker_id: group
                for group, speakers in self.members.items()
                for speaker_id in speakers
            }
        )

    @property
    def languages(self) -> tuple[str, ...]:
        return tuple(sorted({group.language for group in self.members}))

    def ordered_speakers(self, language: Optional[str] = None) -> tuple[str, ...]:
        """
        Speaker ids in roster order: canonical group order, then member order.
        """
        groups = sorted(self.members, key=lambda group: group.sort_key)
        return tuple(
            speaker_id
            for group in groups
            if language is None or group.language == language
            for speaker_id in self.members[group]
        )

    def to_text(self, delimiter: str = cfg.delimiter) -> str:
        header = ("speaker_id", "language", "gender", "age_bucket")
        rows = []
        for speaker_id in self.ordered_speakers():
            group = self.group_of[speaker_id]
            rows.append(
                (speaker_id, group.language, group.gender.value, group.age_bucket.value)
            )
        return format_rows(header, rows, delimiter=delimiter)

    @classmethod
    def from_text(
        cls,
        text: str,
        fold_id: int,
        delimiter: str = cfg.delimiter,
    ) -> TestRoster:
        rows = parse_rows(
            text,
            required=("speaker_id", "language", "gender", "age_bucket"),
            error_type=SplitError,
            delimiter=delimiter,
            source="roster",
        )
        members: dict[GroupKey, list[str]] = {}
        for _, row in rows:
            group = GroupKey.from_fields(row["language"], row["gender"], row["age_bucket"])
            members.setdefault(group, []).append(row["speaker_id"])
        return cls(
            fold_id=fold_id,
            members=types.MappingProxyType(
                {group: tuple(speakers) for group, speakers in members.items()}
            ),
        )


def select_test_roster(index: DatasetIndex, cfg: SplitConfig, fold: int) -> TestRoster:
    """
    Sample ``cfg.test_users_per_group`` speakers uniformly without replacement from
    every group of every language of the index.

    Deterministic for a fixed (seed, fold). The pool of each group is sorted by
    speaker id before sampling so the manifest row order has no influence.

    Raises:
        SplitError: if a group holds fewer speakers than requested.
    """
    if not 0 <= fold < cfg.n_folds:
        raise SplitError(f"fold {fold} outside [0, {cfg.n_folds})")

    seed = fold_seed(cfg.seed, fold)
    size = cfg.test_users_per_group
    members: dict[GroupKey, tuple[str, ...]] = {}

    for group in index.groups():
        pool = sorted(index.group_index[group])
        if len(pool) < size:
            raise SplitError(
                f"group {group.qualified_label} has {len(pool)} speakers, "
                f"{size} required for the test roster"
            )
        rng = make_rng(mix_seed(seed, "roster", group.qualified_label))
        chosen = rng.choice(len(pool), size=size, replace=False)
        members[group] = tuple(sorted(pool[position] for position in chosen))
        logger.debug(
            f"[select_test_roster] fold {fold}: {group.qualified_label} "
            f"{size}/{len(pool)} speakers"
        )

    return TestRoster(fold_id=fold, members=types.MappingProxyType(members))


class TrainRecipe(enum.Enum):
    user_balanced = 1
    unbalanced = 2
    utterance_balanced = 3


@dataclasses.dataclass(frozen=True)
class TrainItem:
    speaker_id: str
    utterance_id: str
    group: GroupKey


@dataclasses.dataclass(frozen=True)
class TrainSplit:
    """
    List of training utterances produced by one recipe.

    Items are always sorted by (speaker_id, utterance_id).
    """

    recipe: TrainRecipe
    languages: frozenset[str]
    items: tuple[TrainItem, ...]

    @classmethod
    def from_items(
        cls,
        recipe: TrainRecipe,
        languages: Iterable[str],
        items: Iterable[TrainItem],
    ) -> TrainSplit:
        ordered = sorted(items, key=lambda item: (item.speaker_id, item.utterance_id))
        return cls(recipe=recipe, languages=frozenset(languages), items=tuple(ordered))

    @functools.cached_property
    def speaker_ids(self) -> frozenset[str]:
        return frozenset(item.speaker_id for item in self.items)

    def speaker_counts(self) -> dict[GroupKey, int]:
        speakers: dict[GroupKey, set[str]] = {}
        for item in self.items:
            speakers.setdefault(item.group, set()).add(item.speaker_id)
        return {group: len(ids) for group, ids in speakers.items()}

    def utterance_counts(self) -> dict[GroupKey, int]:
        counts: dict[GroupKey, int] = {}
        for item in self.items:
            counts[item.group] = counts.get(item.group, 0) + 1
        return counts

    @property
    def identifier(self) -> str:
        """
        Human-readable name, like ``ENGLISH-SPANISH TRAIN 1``.
        """
        languages = "-".join(language.upper() for language in sorted(self.languages))
        return f"{languages} TRAIN {self.recipe.value}"

    def to_text(self, delimiter: str = cfg.delimiter) -> str:
        header = ("speaker_id", "utterance_id", "language", "gender", "age_bucket")
        rows = [
            (
                item.speaker_id,
                item.utterance_id,
                item.group.language,
                item.group.gender.value,
                item.group.age_bucket.value,
            )
            for item in self.items
        ]
        return format_rows(header, rows, delimiter=delimiter)


def _remaining_groups(
    index: DatasetIndex,
    roster: TestRoster,
) -> dict[GroupKey, list[str]]:
    """
    Speakers of each group once the test speakers are removed, sorted by id.
    """
    missing = roster.speaker_ids - set(index.records)
    if missing:
        raise SplitError(
            f"{len(missing)} roster speaker(s) not in the index, "
            f"e.g. '{sorted(missing)[0]}'"
        )
    return {
        group: sorted(
            speaker_id
            for speaker_id in index.group_index[group]
            if speaker_id not in roster.speaker_ids
        )
        for group in index.groups()
    }


def _all_items(index: DatasetIndex, speaker_id: str) -> list[TrainItem]:
    record = index[speaker_id]
    group = index.group_of[speaker_id]
    return [
        TrainItem(speaker_id, utterance.utterance_id, group)
        for utterance in record.utterances
    ]


def _cross_language_cap(per_language: Mapping[str, int]) -> int:
    return min(per_language.values())


def build_train_user_balanced(
    index: DatasetIndex,
    roster: TestRoster,
    cfg: SplitConfig,
) -> TrainSplit:
    """
    Sample the same number of speakers in every group, keeping all their utterances.

    Per language the count is the size of the smallest group left after removing
    the test speakers; with several languages it is further capped at the smallest
    per-language count.

    Raises:
        SplitError: if a group is empty after test exclusion.
    """
    remaining = _remaining_groups(index, roster)
    for group, speakers in remaining.items():
        if not speakers:
            raise SplitError(
                f"group {group.qualified_label} is empty after test exclusion"
            )

    per_language = {
        language: min(len(remaining[group]) for group in index.groups(language))
        for language in index.languages
    }
    count = _cross_language_cap(per_language)

    items: list[TrainItem] = []
    for group, speakers in remaining.items():
        rng = make_rng(
            mix_seed(cfg.seed, "train-user", roster.fold_id, group.qualified_label)
        )
        chosen = rng.choice(len(speakers), size=count, replace=False)
        for position in sorted(chosen):
            items.extend(_all_items(index, speakers[position]))

    logger.info(
        f"[build_train_user_balanced] {count} speakers per group, "
        f"{len(items)} utterances"
    )
    return TrainSplit.from_items(TrainRecipe.user_balanced, index.languages, items)


def build_train_unbalanced(index: DatasetIndex, roster: TestRoster) -> TrainSplit:
    """
    Every utterance of every speaker not in the roster.
    """
    remaining = _remaining_groups(index, roster)
    items = [
        item
        for speakers in remaining.values()
        for speaker_id in speakers
        for item in _all_items(index, speaker_id)
    ]
    logger.info(f"[build_train_unbalanced] {len(items)} utterances")
    return TrainSplit.from_items(TrainRecipe.unbalanced, index.languages, items)


def build_train_utterance_balanced(
    index: DatasetIndex,
    roster: TestRoster,
    cfg: SplitConfig,
) -> TrainSplit:
    """
    Sample the same number of utterances in every group, uniformly without
    replacement among the utterances of the non-test speakers.

    Raises:
        SplitError: if a group has no utterance after test exclusion.
    """
    remaining = _remaining_groups(index, roster)
    pools: dict[GroupKey, list[TrainItem]] = {}
    for group, speakers in remaining.items():
        pool = [item for speaker_id in speakers for item in _all_items(index, speaker_id)]
        if not pool:
            raise SplitError(
                f"group {group.qualified_label} has no utterance after test exclusion"
            )
        pools[group] = pool

    per_language = {
        language: min(len(pools[group]) for group in index.groups(language))
        for language in index.languages
    }
    count = _cross_language_cap(per_language)

    items: list[TrainItem] = []
    for group, pool in pools.items():
        rng = make_rng(
            mix_seed(cfg.seed, "train-utterance", roster.fold_id, group.qualified_label)
        )
        chosen = rng.choice(len(pool), size=count, replace=False)
        items.extend(pool[position] for position in chosen)

    logger.info(
        f"[build_train_utterance_balanced] {count} utterances per group, "
        f"{len(items)} utterances"
    )
    return TrainSplit.from_items(TrainRecipe.utterance_balanced, index.languages, items)


def build_train_split(
    index: DatasetIndex,
    roster: TestRoster,
    cfg: SplitConfig,
    recipe: TrainRecipe,
) -> TrainSplit:
    if recipe is TrainRecipe.user_balanced:
        return build_train_user_balanced(index, roster, cfg)
    if recipe is TrainRecipe.unbalanced:
        return build_train_unbalanced(index, roster)
    return build_train_utterance_balanced(index, roster, cfg)


def _cap_by_speakers(
    items: Sequence[TrainItem],
    group: GroupKey,
    count: int,
    seed: int,
) -> list[TrainItem]:
    speakers = sorted({item.speaker_id for item in items})
    if len(speakers) <= count:
        return list(items)
    rng = make_rng(mix_seed(seed, "merge-user", group.qualified_label))
    kept = {speakers[position] for position in rng.choice(len(speakers), count, False)}
    return [item for item in items if item.speaker_id in kept]


def _cap_by_utterances(
    items: Sequence[TrainItem],
    group: GroupKey,
    count: int,
    seed: int,
) -> list[TrainItem]:
    if len(items) <= count:
        return list(items)
    rng = make_rng(mix_seed(seed, "merge-utterance", group.qualified_label))
    return [items[position] for position in sorted(rng.choice(len(items), count, False))]


def merge_language_splits(splits: Sequence[TrainSplit], seed: int = 0) -> TrainSplit:
    """
    Fuse per-language splits of the same recipe into a multi-language split.

    For the balanced recipes each group is capped at the smallest per-group count
    found across the languages (speakers for user_balanced, utterances for
    utterance_balanced). The unbalanced recipe is never capped.

    Args:
        splits: splits to merge, with disjoint languages
        seed: seed used when capping requires subsampling

    Raises:
        SplitError: on an empty list, mixed recipes or overlapping languages.
    """
    if not splits:
        raise SplitError("no split to merge")
    if len(splits) == 1:
        return splits[0]

    recipes = {split.recipe for split in splits}
    if len(recipes) > 1:
        raise SplitError(
            f"cannot merge different recipes {sorted(recipe.name for recipe in recipes)}"
        )
    recipe = recipes.pop()

    languages: set[str] = set()
    for split in splits:
        overlap = languages & split.languages
        if overlap:
            raise SplitError(f"language(s) {sorted(overlap)} present in several splits")
        languages |= split.languages

    by_group: dict[GroupKey, list[TrainItem]] = {}
    for split in splits:
        for item in split.items:
            by_group.setdefault(item.group, []).append(item)

    if recipe is TrainRecipe.unbalanced:
        items = [item for split in splits for item in split.items]
        return TrainSplit.from_items(recipe, languages, items)

    items = []
    if recipe is TrainRecipe.user_balanced:
        counts = [count for split in splits for count in split.speaker_counts().values()]
        cap = min(counts)
        for group, group_items in by_group.items():
            items.extend(_cap_by_speakers(group_items, group, cap, seed))
    else:
        counts = [count for split in splits for count in split.utterance_counts().values()]
        cap = min(counts)
        for group, group_items in by_group.items():
            items.extend(_cap_by_utterances(group_items, group, cap, seed))

    logger.info(
        f"[merge_language_splits] {recipe.name} over {sorted(languages)}: "
        f"cap {cap} per group, {len(items)} utterances"
    )
    return TrainSplit.from_items(recipe, languages, items)
