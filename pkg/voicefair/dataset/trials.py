"""
Generation and validation of verification trial files.

Each test speaker contributes ``n_same`` genuine pairs (two distinct utterances of the
speaker) and ``n_diff`` impostor pairs (an utterance of the speaker against one of a
partner chosen under the test mode rule).
"""
from __future__ import annotations

__all__ = (
    "TestMode",
    "TrialPair",
    "TrialFile",
    "ViolationKind",
    "Violation",
    "ValidationReport",
    "gen_trials",
    "validate_trials",
)

import dataclasses
import enum
import functools
import itertools
import logging
from typing import Optional

import numpy

from voicefair import cfg
from voicefair.errors import TrialError
from voicefair.utils import format_rows
from voicefair.utils import make_rng
from voicefair.utils import mix_seed
from voicefair.utils import parse_rows
from .base import DatasetIndex
from .base import GroupKey
from .splits import TestRoster

logger = logging.getLogger(__name__)

TRIAL_COLUMNS = (
    "pair_id",
    "label",
    "enroll_speaker",
    "enroll_utt",
    "probe_speaker",
    "probe_utt",
    "language",
    "gender",
    "age_bucket",
)


class TestMode(enum.Enum):
    """
    Rule used to pick the partner speaker of impostor pairs.
    """

    same_age = "same_age"
    same_gender = "same_gender"
    random = "random"

    # not a pytest test class
    __test__ = False

    @property
    def number(self) -> int:
        return _MODE_NUMBERS[self]

    @property
    def label(self) -> str:
        """
        Short protocol name, like ``test1``.
        """
        return f"test{self.number}"

    @classmethod
    def from_label(cls, label: str) -> TestMode:
        """
        Accept ``test1``/``test2``/``test3``, ``1``/``2``/``3`` or the variant name.
        """
        token = str(label).strip().lower()
        for mode, number in _MODE_NUMBERS.items():
            if token in (mode.value, f"test{number}", str(number)):
                return mode
        raise TrialError(
            f"unknown test mode '{label}', expected one of "
            f"{[mode.label for mode in cls]} or {[mode.value for mode in cls]}"
        )

    def allows(self, current: GroupKey, partner: GroupKey) -> bool:
        """
        True if ``partner`` may be the impostor of ``current`` under this mode.
        """
        if current.language != partner.language:
            return False
        if self is TestMode.same_age:
            return current.age_bucket == partner.age_bucket
        if self is TestMode.same_gender:
            return current.gender == partner.gender
        return True


_MODE_NUMBERS = {
    TestMode.same_age: 1,
    TestMode.same_gender: 2,
    TestMode.random: 3,
}


@dataclasses.dataclass(frozen=True)
class TrialPair:
    """
    One verification attempt. ``group`` is the group of the enrollment speaker.
    """

    pair_id: int
    enroll_utt: tuple[str, str]
    probe_utt: tuple[str, str]
    label: int
    group: GroupKey

    @property
    def enroll_speaker(self) -> str:
        return self.enroll_utt[0]

    @property
    def probe_speaker(self) -> str:
        return self.probe_utt[0]

    @property
    def is_genuine(self) -> bool:
        return self.label == 1


@dataclasses.dataclass(frozen=True, eq=False)
class TrialFile:
    mode: TestMode
    fold_id: int
    language: str
    pairs: tuple[TrialPair, ...]
    n_same: int = cfg.n_same
    n_diff: int = cfg.n_diff

    def __len__(self) -> int:
        return len(self.pairs)

    def __eq__(self, other) -> bool:
        if isinstance(other, TrialFile):
            return (
                self.mode == other.mode
                and self.fold_id == other.fold_id
                and self.language == other.language
                and self.pairs == other.pairs
            )
        return False

    @property
    def identifier(self) -> str:
        """
        Human-readable name, like ``ENGLISH TEST 1``.
        """
        return f"{self.language.upper()} TEST {self.mode.number}"

    @functools.cached_property
    def utterance_keys(self) -> tuple[tuple[str, str], ...]:
        """
        Every (speaker_id, utterance_id) referenced by the file, deduplicated, in
        order of first reference.
        """
        keys = {}
        for pair in self.pairs:
            keys.setdefault(pair.enroll_utt, None)
            keys.setdefault(pair.probe_utt, None)
        return tuple(keys)

    def to_text(self, delimiter: str = cfg.delimiter) -> str:
        rows = [
            (
                pair.pair_id,
                pair.label,
                pair.enroll_utt[0],
                pair.enroll_utt[1],
                pair.probe_utt[0],
                pair.probe_utt[1],
                pair.group.language,
                pair.group.gender.value,
                pair.group.age_bucket.value,
            )
            for pair in self.pairs
        ]
        return format_rows(TRIAL_COLUMNS, rows, delimiter=delimiter)

    @classmethod
    def from_text(
        cls,
        text: str,
        mode: TestMode,
        fold_id: int,
        language: Optional[str] = None,
        n_same: int = cfg.n_same,
        n_diff: int = cfg.n_diff,
        delimiter: str = cfg.delimiter,
    ) -> TrialFile:
        """
        Parse a trial file written by :meth:`to_text`.

        Args:
            text: file content
            mode: test mode the file was generated with
            fold_id: fold the file belongs to
            language: file language; deduced from the rows when None
            n_same: genuine pairs per speaker the file was generated with
            n_diff: impostor pairs per speaker the file was generated with
            delimiter: column delimiter
        """
        rows = parse_rows(
            text,
            required=TRIAL_COLUMNS,
            error_type=TrialError,
            delimiter=delimiter,
            source="trial file",
        )
        pairs = []
        for line_number, row in rows:
            try:
                pair_id = int(row["pair_id"])
                label = int(row["label"])
                group = GroupKey.from_fields(
                    row["language"], row["gender"], row["age_bucket"]
                )
            except (ValueError, TypeError) as excp:
                raise TrialError(f"trial file: row {line_number}: {excp}") from excp
            if label not in (0, 1):
                raise TrialError(
                    f"trial file: row {line_number}: label {label} not in {{0, 1}}"
                )
            pairs.append(
                TrialPair(
                    pair_id=pair_id,
                    enroll_utt=(row["enroll_speaker"], row["enroll_utt"]),
                    probe_utt=(row["probe_speaker"], row["probe_utt"]),
                    label=label,
                    group=group,
                )
            )

        if language is None:
            languages = sorted({pair.group.language for pair in pairs})
            language = "-".join(languages)

        return cls(
            mode=mode,
            fold_id=fold_id,
            language=language,
            pairs=tuple(pairs),
            n_same=n_same,
            n_diff=n_diff,
        )


def _genuine_pairs(
    utterance_ids: tuple[str, ...],
    n_same: int,
    rng: numpy.random.Generator,
) -> list[tuple[str, str]]:
    candidates = list(itertools.combinations(utterance_ids, 2))
    if len(candidates) >= n_same:
        chosen = sorted(rng.choice(len(candidates), size=n_same, replace=False))
    else:
        chosen = rng.integers(0, len(candidates), size=n_same)
    return [candidates[position] for position in chosen]


def gen_trials(
    roster: TestRoster,
    index: DatasetIndex,
    mode: TestMode,
    seed: int,
    n_same: int = cfg.n_same,
    n_diff: int = cfg.n_diff,
    language: Optional[str] = None,
) -> TrialFile:
    """
    Build the trial pairs of the roster speakers under the given test mode.

    Genuine pairs are drawn without replacement from the unordered pairs of distinct
    utterances of the speaker, or with replacement when fewer than ``n_same`` exist.
    Impostor pairs use a uniform enrollment utterance of the speaker, a uniform
    partner among the eligible roster speakers of the same language and a uniform
    probe utterance of that partner.

    Every speaker draws from its own generator derived from (seed, mode, speaker),
    so the output does not depend on the processing order.

    Args:
        roster: test speakers
        index: dataset holding the utterances of the roster speakers
        mode: partner selection rule
        seed: master seed of the fold
        n_same: genuine pairs per speaker
        n_diff: impostor pairs per speaker
        language: restrict the file to one roster language. None keeps every
            roster speaker.

    Returns:
        pairs grouped by speaker in roster order, genuine pairs first.
        ``pair_id`` counts from 0.

    Raises:
        TrialError: if a speaker has fewer than 2 utterances or no eligible partner.
    """
    if n_same < 1 or n_diff < 1:
        raise TrialError(
            f"n_same and n_diff must be positive integers, got {n_same} and {n_diff}"
        )
    if language is not None and language not in roster.languages:
        raise TrialError(f"language '{language}' not in roster {list(roster.languages)}")

    speakers = roster.ordered_speakers(language)
    for speaker_id in speakers:
        if speaker_id not in index:
            raise TrialError(f"roster speaker '{speaker_id}' not in the index")

    pairs: list[TrialPair] = []
    for speaker_id in speakers:
        group = roster.group_of[speaker_id]
        utterance_ids = index[speaker_id].utterance_ids
        if len(utterance_ids) < 2:
            raise TrialError(
                f"speaker '{speaker_id}' has {len(utterance_ids)} utterance(s), "
                f"at least 2 required for genuine pairs"
            )

        partners = [
            partner
            for partner in roster.ordered_speakers(group.language)
            if partner != speaker_id and mode.allows(group, roster.group_of[partner])
        ]
        if not partners:
            raise TrialError(
                f"speaker '{speaker_id}' has no eligible impostor partner "
                f"under mode {mode.value}"
            )

        rng = make_rng(mix_seed(seed, mode.value, speaker_id))

        for first, second in _genuine_pairs(utterance_ids, n_same, rng):
            pairs.append(
                TrialPair(
                    pair_id=len(pairs),
                    enroll_utt=(speaker_id, first),
                    probe_utt=(speaker_id, second),
                    label=1,
                    group=group,
                )
            )

        for _ in range(n_diff):
            enroll = utterance_ids[rng.integers(len(utterance_ids))]
            partner = partners[rng.integers(len(partners))]
            partner_utterances = index[partner].utterance_ids
            probe = partner_utterances[rng.integers(len(partner_utterances))]
            pairs.append(
                TrialPair(
                    pair_id=len(pairs),
                    enroll_utt=(speaker_id, enroll),
                    probe_utt=(partner, probe),
                    label=0,
                    group=group,
                )
            )

    file_language = language or "-".join(roster.languages)
    logger.info(
        f"[gen_trials] {mode.label} {file_language} fold {roster.fold_id}: "
        f"{len(pairs)} pairs for {len(speakers)} speakers"
    )
    return TrialFile(
        mode=mode,
        fold_id=roster.fold_id,
        language=file_language,
        pairs=tuple(pairs),
        n_same=n_same,
        n_diff=n_diff,
    )


class ViolationKind(enum.Enum):
    count = "count"
    label = "label"
    mode = "mode"
    missing_utterance = "missing_utterance"
    unknown_speaker = "unknown_speaker"
    group_mismatch = "group_mismatch"


@dataclasses.dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    message: str
    pair_id: Optional[int] = None
    speaker_id: Optional[str] = None

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.message}"


@dataclasses.dataclass(frozen=True)
class ValidationReport:
    """
    Result of :func:`validate_trials`; an empty report means a valid file.
    """

    violations: tuple[Violation, ...] = ()

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def of_kind(self, kind: ViolationKind) -> tuple[Violation, ...]:
        return tuple(violation for violation in self.violations if violation.kind is kind)


def _check_pair(
    pair: TrialPair,
    mode: TestMode,
    roster: TestRoster,
    index: DatasetIndex,
) -> list[Violation]:
    violations = []

    unknown = [
        speaker_id
        for speaker_id in dict.fromkeys((pair.enroll_speaker, pair.probe_speaker))
        if speaker_id not in roster.speaker_ids
    ]
    for speaker_id in unknown:
        violations.append(
            Violation(
                ViolationKind.unknown_speaker,
                f"pair {pair.pair_id}: speaker '{speaker_id}' not in the roster",
                pair.pair_id,
                speaker_id,
            )
        )

    for speaker_id, utterance_id in (pair.enroll_utt, pair.probe_utt):
        if speaker_id not in index or index[speaker_id].get_utterance(utterance_id) is None:
            violations.append(
                Violation(
                    ViolationKind.missing_utterance,
                    f"pair {pair.pair_id}: utterance ({speaker_id}, {utterance_id}) "
                    f"not in the index",
                    pair.pair_id,
                    speaker_id,
                )
            )

    if pair.label == 1:
        if pair.enroll_speaker != pair.probe_speaker:
            violations.append(
                Violation(
                    ViolationKind.label,
                    f"pair {pair.pair_id}: genuine pair across speakers "
                    f"'{pair.enroll_speaker}' and '{pair.probe_speaker}'",
                    pair.pair_id,
                    pair.enroll_speaker,
                )
            )
        elif pair.enroll_utt == pair.probe_utt:
            violations.append(
                Violation(
                    ViolationKind.label,
                    f"pair {pair.pair_id}: genuine pair uses utterance "
                    f"'{pair.enroll_utt[1]}' twice",
                    pair.pair_id,
                    pair.enroll_speaker,
                )
            )
    elif pair.label == 0:
        if pair.enroll_speaker == pair.probe_speaker:
            violations.append(
                Violation(
                    ViolationKind.label,
                    f"pair {pair.pair_id}: impostor pair within speaker "
                    f"'{pair.enroll_speaker}'",
                    pair.pair_id,
                    pair.enroll_speaker,
                )
            )
        elif not unknown:
            current = roster.group_of[pair.enroll_speaker]
            partner = roster.group_of[pair.probe_speaker]
            if not mode.allows(current, partner):
                violations.append(
                    Violation(
                        ViolationKind.mode,
                        f"pair {pair.pair_id}: partner group {partner.qualified_label} "
                        f"not allowed for {current.qualified_label} under {mode.value}",
                        pair.pair_id,
                        pair.enroll_speaker,
                    )
                )
    else:
        violations.append(
            Violation(
                ViolationKind.label,
                f"pair {pair.pair_id}: label {pair.label} not in {{0, 1}}",
                pair.pair_id,
                pair.enroll_speaker,
            )
        )

    if pair.enroll_speaker in roster.speaker_ids:
        expected = roster.group_of[pair.enroll_speaker]
        if pair.group != expected:
            violations.append(
                Violation(
                    ViolationKind.group_mismatch,
                    f"pair {pair.pair_id}: group {pair.group.qualified_label} differs "
                    f"from the roster group {expected.qualified_label}",
                    pair.pair_id,
                    pair.enroll_speaker,
                )
            )

    return violations


def _file_languages(file: TrialFile, roster: TestRoster) -> set[str]:
    """
    Roster languages the file is expected to cover, matched on the file language.
    """
    if file.language in roster.languages:
        return {file.language}
    if file.language == "-".join(roster.languages):
        return set(roster.languages)
    return {pair.group.language for pair in file.pairs}


def validate_trials(
    file: TrialFile,
    roster: TestRoster,
    index: DatasetIndex,
) -> ValidationReport:
    """
    Check a trial file against the protocol; never raises for protocol violations.

    Checked: per-speaker genuine and impostor counts, label consistency, the mode
    partner constraint, utterance existence, speaker membership in the roster and
    the group recorded on each pair.
    """
    violations: list[Violation] = []
    genuine_counts: dict[str, int] = {}
    impostor_counts: dict[str, int] = {}

    for pair in file.pairs:
        violations.extend(_check_pair(pair, file.mode, roster, index))
        counts = genuine_counts if pair.label == 1 else impostor_counts
        counts[pair.enroll_speaker] = counts.get(pair.enroll_speaker, 0) + 1

    file_languages = _file_languages(file, roster)
    for speaker_id in roster.ordered_speakers():
        if roster.group_of[speaker_id].language not in file_languages:
            continue
        for name, counts, expected in (
            ("genuine", genuine_counts, file.n_same),
            ("impostor", impostor_counts, file.n_diff),
        ):
            found = counts.get(speaker_id, 0)
            if found != expected:
                violations.append(
                    Violation(
                        ViolationKind.count,
                        f"speaker '{speaker_id}' has {found} {name} pairs, "
                        f"expected {expected}",
                        speaker_id=speaker_id,
                    )
                )

    if violations:
        logger.warning(
            f"[validate_trials] {file.identifier}: {len(violations)} violation(s)"
        )
    return ValidationReport(tuple(violations))
