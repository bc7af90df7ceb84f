from __future__ import annotations

__all__ = (
    "Gender",
    "AgeBucket",
    "GroupKey",
    "UtteranceRef",
    "SpeakerRecord",
    "DatasetIndex",
    "assign_group",
)

import dataclasses
import enum
import functools
import types
from pathlib import Path
from typing import Iterable
from typing import Mapping
from typing import Optional

from voicefair import cfg
from voicefair.errors import ManifestError


class Gender(enum.Enum):
    female = "female"
    male = "male"

    @classmethod
    def parse(cls, token: str) -> Gender:
        """
        Convert a manifest token to a Gender, case-insensitive.

        Raises:
            ManifestError: for any token outside the enumerated domain.
        """
        normalized = str(token).strip().lower()
        value = _GENDER_ALIASES.get(normalized)
        if value is None:
            raise ManifestError(
                f"unrecognized gender token '{token}', expected one of "
                f"{sorted(_GENDER_ALIASES)}"
            )
        return value


_GENDER_ALIASES = {
    "female": Gender.female,
    "f": Gender.female,
    "male": Gender.male,
    "m": Gender.male,
}


class AgeBucket(enum.Enum):
    young = "young"
    old = "old"


@dataclasses.dataclass(frozen=True)
class GroupKey:
    """
    A demographic group: one (gender, age bucket) cell of a language.
    """

    language: str
    gender: Gender
    age_bucket: AgeBucket

    @property
    def sort_key(self) -> tuple[str, int]:
        """
        Canonical ordering: by language, then old-female, young-female, old-male,
        young-male.
        """
        return self.language, _GROUP_ORDER.index((self.gender, self.age_bucket))

    @property
    def label(self) -> str:
        """
        Short name of the group inside its language, like ``old-female``.
        """
        return f"{self.age_bucket.value}-{self.gender.value}"

    @property
    def qualified_label(self) -> str:
        return f"{self.language}/{self.label}"

    @classmethod
    def all_for_language(cls, language: str) -> tuple[GroupKey, ...]:
        """
        The four groups of a language in canonical order.
        """
        return tuple(
            cls(language, gender, age_bucket) for gender, age_bucket in _GROUP_ORDER
        )

    @classmethod
    def from_fields(cls, language: str, gender: str, age_bucket: str) -> GroupKey:
        """
        Rebuild a key from its serialized fields.
        """
        try:
            return cls(language, Gender(gender), AgeBucket(age_bucket))
        except ValueError as excp:
            raise ManifestError(
                f"invalid group fields ({language}, {gender}, {age_bucket}): {excp}"
            ) from excp


_GROUP_ORDER = (
    (Gender.female, AgeBucket.old),
    (Gender.female, AgeBucket.young),
    (Gender.male, AgeBucket.old),
    (Gender.male, AgeBucket.young),
)


@dataclasses.dataclass(frozen=True)
class UtteranceRef:
    utterance_id: str
    audio_path: Path


@dataclasses.dataclass(frozen=True)
class SpeakerRecord:
    """
    One enrolled individual with its sensitive attributes and its utterances, in
    manifest order.
    """

    speaker_id: str
    language: str
    gender: Gender
    age_years: int
    utterances: tuple[UtteranceRef, ...]

    def __post_init__(self):
        if not self.utterances:
            raise ManifestError(f"speaker '{self.speaker_id}' has no utterance")
        if self.age_years < 0:
            raise ManifestError(
                f"speaker '{self.speaker_id}' has a negative age {self.age_years}"
            )
        seen = set()
        for utterance in self.utterances:
            if utterance.utterance_id in seen:
                raise ManifestError(
                    f"duplicate utterance '{utterance.utterance_id}' "
                    f"for speaker '{self.speaker_id}'"
                )
            seen.add(utterance.utterance_id)

    @functools.cached_property
    def utterance_ids(self) -> tuple[str, ...]:
        return tuple(utterance.utterance_id for utterance in self.utterances)

    def get_utterance(self, utterance_id: str) -> Optional[UtteranceRef]:
        for utterance in self.utterances:
            if utterance.utterance_id == utterance_id:
                return utterance
        return None


def assign_group(record: SpeakerRecord, split_age: int = cfg.split_age) -> GroupKey:
    """
    Return the demographic group of the given speaker.

    A speaker is young if strictly younger than ``split_age``, old otherwise.

    Args:
        record: speaker to classify
        split_age: age boundary in years, belonging to the old bucket

    Returns:
        group of the speaker
    """
    age_bucket = AgeBucket.young if record.age_years < split_age else AgeBucket.old
    return GroupKey(record.language, record.gender, age_bucket)


@dataclasses.dataclass(frozen=True, eq=False)
class DatasetIndex:
    """
    Immutable collection of speakers, keyed by speaker id, with their group assignment.

    ``languages`` is the set of languages the index was declared for; it can list
    languages without any speaker (e.g. after filtering) so group accounting still
    reports every group.
    """

    records: Mapping[str, SpeakerRecord]
    languages: tuple[str, ...]
    split_age: int = cfg.split_age

    @classmethod
    def from_records(
        cls,
        records: Iterable[SpeakerRecord],
        languages: Optional[Iterable[str]] = None,
        split_age: int = cfg.split_age,
    ) -> DatasetIndex:
        """
        Build an index, preserving the order of the given records.

        Raises:
            ManifestError: on duplicated speaker ids.
        """
        mapping: dict[str, SpeakerRecord] = {}
        for record in records:
            if record.speaker_id in mapping:
                raise ManifestError(f"duplicate speaker id '{record.speaker_id}'")
            mapping[record.speaker_id] = record

        declared = set(languages or [])
        declared.update(record.language for record in mapping.values())

        return cls(
            records=types.MappingProxyType(mapping),
            languages=tuple(sorted(declared)),
            split_age=split_age,
        )

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, speaker_id: str) -> bool:
        return speaker_id in self.records

    def __getitem__(self, speaker_id: str) -> SpeakerRecord:
        return self.records[speaker_id]

    @functools.cached_property
    def group_of(self) -> Mapping[str, GroupKey]:
        """
        speaker id -> group.
        """
        return types.MappingProxyType(
            {
                speaker_id: assign_group(record, self.split_age)
                for speaker_id, record in self.records.items()
            }
        )

    @functools.cached_property
    def group_index(self) -> Mapping[GroupKey, tuple[str, ...]]:
        """
        Every declared group mapped to its speaker ids, in record order.
        """
        index: dict[GroupKey, list[str]] = {
            group: [] for language in self.languages
            for group in GroupKey.all_for_language(language)
        }
        for speaker_id, group in self.group_of.items():
            index[group].append(speaker_id)
        return types.MappingProxyType(
            {group: tuple(speaker_ids) for group, speaker_ids in index.items()}
        )

    def groups(self, language: Optional[str] = None) -> tuple[GroupKey, ...]:
        languages = self.languages if language is None else (language,)
        return tuple(
            group for lang in languages for group in GroupKey.all_for_language(lang)
        )

    def speakers_in(self, group: GroupKey) -> tuple[SpeakerRecord, ...]:
        return tuple(
            self.records[speaker_id] for speaker_id in self.group_index.get(group, ())
        )

    def with_records(self, records: Iterable[SpeakerRecord]) -> DatasetIndex:
        """
        Return a new index with the same declared languages and split age.
        """
        return DatasetIndex.from_records(
            records, languages=self.languages, split_age=self.split_age
        )
