"""
Cosine scoring of trial pairs over utterance embeddings.
"""
from __future__ import annotations

__all__ = (
    "SCORE_COLUMNS",
    "ScoreRecord",
    "ScoreFile",
    "cosine",
    "score_trials",
)

import dataclasses
import functools
import logging
import math
from typing import Callable
from typing import Optional
from typing import Union

import numpy

from voicefair import cfg
from voicefair.audio import Embedding
from voicefair.audio import EmbeddingStore
from voicefair.dataset import GroupKey
from voicefair.dataset import TrialFile
from voicefair.errors import ScoringError
from voicefair.utils import format_rows
from voicefair.utils import parse_rows

logger = logging.getLogger(__name__)

SCORE_COLUMNS = (
    "pair_id",
    "label",
    "similarity",
    "language",
    "gender",
    "age_bucket",
    "epoch",
)

_TOLERANCE = 1e-9


@dataclasses.dataclass(frozen=True)
class ScoreRecord:
    pair_id: int
    label: int
    similarity: float
    group: GroupKey
    epoch: Optional[int] = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ScoringError(f"pair {self.pair_id}: label {self.label} not in {{0, 1}}")
        if not math.isfinite(self.similarity) or abs(self.similarity) > 1 + _TOLERANCE:
            raise ScoringError(
                f"pair {self.pair_id}: similarity {self.similarity} outside [-1, 1]"
            )
        if self.epoch is not None and self.epoch < 0:
            raise ScoringError(f"pair {self.pair_id}: negative epoch {self.epoch}")


@dataclasses.dataclass(frozen=True, eq=False)
class ScoreFile:
    """
    Scored trial pairs, in trial file order, with where they come from.

    Args:
        records: one record per trial pair
        train_id: identifier of the training split the embeddings come from
        trial_id: identifier of the scored trial file
        embedding_source: name of the embedding producer
    """

    records: tuple[ScoreRecord, ...]
    train_id: str = ""
    trial_id: str = ""
    embedding_source: str = ""

    def __post_init__(self):
        seen = set()
        for record in self.records:
            if record.pair_id in seen:
                raise ScoringError(f"duplicate pair_id {record.pair_id}")
            seen.add(record.pair_id)

    def __len__(self) -> int:
        return len(self.records)

    @functools.cached_property
    def labels(self) -> numpy.ndarray:
        return numpy.array([record.label for record in self.records], dtype=int)

    @functools.cached_property
    def similarities(self) -> numpy.ndarray:
        return numpy.array(
            [record.similarity for record in self.records], dtype=numpy.float64
        )

    @property
    def epoch(self) -> Optional[int]:
        """
        Epoch shared by every record, None if untagged or mixed.
        """
        epochs = {record.epoch for record in self.records}
        return epochs.pop() if len(epochs) == 1 else None

    def select(self, predicate: Callable[[GroupKey], bool]) -> ScoreFile:
        """
        Keep the records whose enrollment group satisfies the predicate.
        """
        return dataclasses.replace(
            self,
            records=tuple(record for record in self.records if predicate(record.group)),
        )

    def with_epoch(self, epoch: Optional[int]) -> ScoreFile:
        return dataclasses.replace(
            self,
            records=tuple(
                dataclasses.replace(record, epoch=epoch) for record in self.records
            ),
        )

    def to_text(
        self,
        delimiter: str = cfg.delimiter,
        decimals: int = cfg.similarity_decimals,
    ) -> str:
        rows = [
            (
                record.pair_id,
                record.label,
                f"{record.similarity:.{decimals}f}",
                record.group.language,
                record.group.gender.value,
                record.group.age_bucket.value,
                "" if record.epoch is None else record.epoch,
            )
            for record in self.records
        ]
        return format_rows(SCORE_COLUMNS, rows, delimiter=delimiter)

    @classmethod
    def from_text(
        cls,
        text: str,
        train_id: str = "",
        trial_id: str = "",
        embedding_source: str = "",
        delimiter: str = cfg.delimiter,
    ) -> ScoreFile:
        """
        Parse a score file; the ``epoch`` column is optional.
        """
        rows = parse_rows(
            text,
            required=SCORE_COLUMNS[:-1],
            error_type=ScoringError,
            delimiter=delimiter,
            source="score file",
        )
        records = []
        for line_number, row in rows:
            epoch_token = (row.get("epoch") or "").strip()
            try:
                records.append(
                    ScoreRecord(
                        pair_id=int(row["pair_id"]),
                        label=int(row["label"]),
                        similarity=float(row["similarity"]),
                        group=GroupKey.from_fields(
                            row["language"], row["gender"], row["age_bucket"]
                        ),
                        epoch=int(epoch_token) if epoch_token else None,
                    )
                )
            except (ValueError, TypeError) as excp:
                raise ScoringError(f"score file: row {line_number}: {excp}") from excp
        return cls(
            records=tuple(records),
            train_id=train_id,
            trial_id=trial_id,
            embedding_source=embedding_source,
        )


def _as_vector(value: Union[Embedding, numpy.ndarray]) -> numpy.ndarray:
    if isinstance(value, Embedding):
        return value.vector
    return numpy.asarray(value, dtype=numpy.float64)


def cosine(
    a: Union[Embedding, numpy.ndarray],
    b: Union[Embedding, numpy.ndarray],
) -> float:
    """
    Cosine similarity ``a.b / (|a| |b|)``, clipped to [-1, 1].

    Raises:
        ScoringError: on a dimension mismatch or a zero vector.
    """
    a = _as_vector(a)
    b = _as_vector(b)
    if a.shape != b.shape:
        raise ScoringError(f"dimension mismatch {a.shape} vs {b.shape}")
    norm_a = numpy.linalg.norm(a)
    norm_b = numpy.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise ScoringError("cosine similarity undefined for a zero vector")
    return float(numpy.clip(numpy.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


def score_trials(
    trials: TrialFile,
    store: EmbeddingStore,
    train_id: str = "",
    embedding_source: str = "",
    epoch: Optional[int] = None,
) -> ScoreFile:
    """
    Cosine-score every pair of the trial file.

    Args:
        trials: pairs to score
        store: embeddings of every referenced utterance
        train_id: provenance, identifier of the training split
        embedding_source: provenance, name of the embedding producer
        epoch: optional epoch tag copied on every record

    Returns:
        one record per pair, in trial file order

    Raises:
        ScoringError: if an utterance has no embedding or a zero embedding.
    """
    missing = store.missing(trials.utterance_keys)
    if missing:
        speaker_id, utterance_id = missing[0]
        raise ScoringError(
            f"no embedding for utterance ({speaker_id}, {utterance_id}); "
            f"{len(missing)} utterance(s) missing in total"
        )

    enroll = store.matrix([pair.enroll_utt for pair in trials.pairs])
    probe = store.matrix([pair.probe_utt for pair in trials.pairs])
    if not trials.pairs:
        similarities = numpy.zeros(0)
    else:
        norms = numpy.linalg.norm(enroll, axis=1) * numpy.linalg.norm(probe, axis=1)
        zero = numpy.flatnonzero(norms == 0)
        if zero.size:
            pair = trials.pairs[zero[0]]
            raise ScoringError(
                f"pair {pair.pair_id}: zero embedding for {pair.enroll_utt} "
                f"or {pair.probe_utt}"
            )
        similarities = numpy.clip(
            numpy.einsum("ij,ij->i", enroll, probe) / norms, -1.0, 1.0
        )

    records = tuple(
        ScoreRecord(
            pair_id=pair.pair_id,
            label=pair.label,
            similarity=float(similarity),
            group=pair.group,
            epoch=epoch,
        )
        for pair, similarity in zip(trials.pairs, similarities)
    )
    logger.info(f"[score_trials] {trials.identifier}: scored {len(records)} pairs")
    return ScoreFile(
        records=records,
        train_id=train_id,
        trial_id=trials.identifier,
        embedding_source=embedding_source,
    )
