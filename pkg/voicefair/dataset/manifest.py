"""
Ingestion of demographically annotated manifests.

A manifest is a delimiter-separated text file with a header row and one row per
utterance. Required columns are ``speaker_id``, ``gender``, ``age`` and
``utterance_path``; ``utterance_id`` is optional (defaults to the file stem of the
path) and any other column is ignored.
"""
from __future__ import annotations

__all__ = (
    "REQUIRED_COLUMNS",
    "load_manifest",
    "filter_min_utterances",
    "group_counts",
    "merge_indices",
    "write_manifest",
)

import logging
from pathlib import Path
from pathlib import PurePath
from typing import Iterable
from typing import Optional
from typing import Union

from voicefair import cfg
from voicefair.errors import ManifestError
from voicefair.utils import format_rows
from voicefair.utils import parse_rows
from .base import DatasetIndex
from .base import Gender
from .base import GroupKey
from .base import SpeakerRecord
from .base import UtteranceRef

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("speaker_id", "gender", "age", "utterance_path")


def _parse_age(token: str, line_number: int, source: str) -> int:
    try:
        age = int(token.strip())
    except (ValueError, AttributeError):
        raise ManifestError(f"{source}: row {line_number}: unparsable age '{token}'")
    if age < 0:
        raise ManifestError(f"{source}: row {line_number}: negative age {age}")
    return age


def load_manifest(
    manifest_path: Union[str, Path],
    language: str,
    data_root: Optional[Union[str, Path]] = None,
    delimiter: str = cfg.delimiter,
    split_age: int = cfg.split_age,
) -> DatasetIndex:
    """
    Read a manifest file into a DatasetIndex.

    Speakers are kept in order of first appearance, utterances in row order.

    Args:
        manifest_path: path of the UTF-8 manifest file
        language: language label given to every speaker of the file
        data_root: directory relative utterance paths are resolved against.
            None keeps them relative to the manifest directory.
        delimiter: column delimiter
        split_age: age boundary used for group assignment

    Returns:
        index of every speaker of the manifest

    Raises:
        ManifestError: missing file or column, unparsable age, unknown gender,
            conflicting speaker attributes or duplicated (speaker, utterance).
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise ManifestError(f"manifest not found: {manifest_path}")

    root = Path(data_root) if data_root is not None else manifest_path.parent
    source = manifest_path.name
    rows = parse_rows(
        manifest_path.read_text(encoding="utf-8"),
        required=REQUIRED_COLUMNS,
        error_type=ManifestError,
        delimiter=delimiter,
        source=source,
    )

    attributes: dict[str, tuple[Gender, int]] = {}
    utterances: dict[str, list[UtteranceRef]] = {}
    seen_keys: set[tuple[str, str]] = set()

    for line_number, row in rows:
        speaker_id = (row.get("speaker_id") or "").strip()
        if not speaker_id:
            raise ManifestError(f"{source}: row {line_number}: empty speaker_id")

        try:
            gender = Gender.parse(row.get("gender") or "")
        except ManifestError as excp:
            raise ManifestError(f"{source}: row {line_number}: {excp.args[0]}")
        age = _parse_age(row.get("age") or "", line_number, source)

        path_token = (row.get("utterance_path") or "").strip()
        if not path_token:
            raise ManifestError(f"{source}: row {line_number}: empty utterance_path")
        utterance_id = (row.get("utterance_id") or "").strip() or PurePath(path_token).stem

        key = (speaker_id, utterance_id)
        if key in seen_keys:
            raise ManifestError(
                f"{source}: row {line_number}: duplicate utterance '{utterance_id}' "
                f"for speaker '{speaker_id}'"
            )
        seen_keys.add(key)

        previous = attributes.setdefault(speaker_id, (gender, age))
        if previous != (gender, age):
            raise ManifestError(
                f"{source}: row {line_number}: speaker '{speaker_id}' declared as "
                f"({gender.value}, {age}) but earlier as "
                f"({previous[0].value}, {previous[1]})"
            )

        audio_path = Path(path_token)
        if not audio_path.is_absolute():
            audio_path = root / audio_path
        utterances.setdefault(speaker_id, []).append(
            UtteranceRef(utterance_id=utterance_id, audio_path=audio_path)
        )

    records = [
        SpeakerRecord(
            speaker_id=speaker_id,
            language=language,
            gender=attributes[speaker_id][0],
            age_years=attributes[speaker_id][1],
            utterances=tuple(speaker_utterances),
        )
        for speaker_id, speaker_utterances in utterances.items()
    ]
    index = DatasetIndex.from_records(records, languages=[language], split_age=split_age)
    logger.info(
        f"[load_manifest] {source}: {len(index)} speakers, {len(rows)} utterances "
        f"({language})"
    )
    return index


def filter_min_utterances(
    index: DatasetIndex,
    min_count: int = cfg.min_utterances,
) -> DatasetIndex:
    """
    Keep only the speakers having at least ``min_count`` utterances.

    Returns:
        new index, possibly empty, with the same declared languages
    """
    if min_count < 1:
        raise ManifestError(f"min_count must be a positive integer, got {min_count}")

    kept = [
        record for record in index.records.values() if len(record.utterances) >= min_count
    ]
    logger.info(
        f"[filter_min_utterances] kept {len(kept)}/{len(index)} speakers "
        f"with >= {min_count} utterances"
    )
    return index.with_records(kept)


def group_counts(index: DatasetIndex) -> dict[GroupKey, int]:
    """
    Number of speakers in each group of each declared language.

    Groups without speakers are reported with a count of 0.
    """
    return {group: len(index.group_index[group]) for group in index.groups()}


def merge_indices(indices: Iterable[DatasetIndex]) -> DatasetIndex:
    """
    Combine single-language indices into a multi-language one.

    Raises:
        ManifestError: if two indices declare the same language, disagree on the
            split age or share a speaker id.
    """
    indices = list(indices)
    if not indices:
        raise ManifestError("no index to merge")

    split_ages = {index.split_age for index in indices}
    if len(split_ages) > 1:
        raise ManifestError(f"indices use different split ages {sorted(split_ages)}")

    languages: list[str] = []
    for index in indices:
        overlap = set(languages) & set(index.languages)
        if overlap:
            raise ManifestError(f"language(s) {sorted(overlap)} declared twice")
        languages.extend(index.languages)

    records = [record for index in indices for record in index.records.values()]
    return DatasetIndex.from_records(
        records, languages=languages, split_age=split_ages.pop()
    )


def write_manifest(
    index: DatasetIndex,
    language: str,
    data_root: Optional[Union[str, Path]] = None,
    delimiter: str = cfg.delimiter,
) -> str:
    """
    Serialize the speakers of one language of the index back to the manifest format.

    Args:
        index: source index
        language: language to export
        data_root: if given, audio paths under it are written relative to it
        delimiter: column delimiter

    Returns:
        manifest text, loadable with :func:`load_manifest`
    """
    header = ("speaker_id", "utterance_id", "gender", "age", "utterance_path")
    rows = []
    for record in index.records.values():
        if record.language != language:
            continue
        for utterance in record.utterances:
            path = utterance.audio_path
            if data_root is not None:
                try:
                    path = path.relative_to(Path(data_root))
                except ValueError:
                    pass
            rows.append(
                (
                    record.speaker_id,
                    utterance.utterance_id,
                    record.gender.value,
                    record.age_years,
                    path.as_posix(),
                )
            )
    return format_rows(header, rows, delimiter=delimiter)
