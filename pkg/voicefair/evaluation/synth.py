"""
Synthetic scores, embeddings and speaker indices with a known group separability.

Scores follow a Gaussian model per group, for which the Equal Error Rate has the
closed form ``Phi(-(mu_g - mu_i) / (sigma_g + sigma_i))``.
"""
from __future__ import annotations

__all__ = (
    "ScoreParams",
    "GroupScoreSpec",
    "expected_eer",
    "synth_scores",
    "synth_embeddings",
    "synth_index",
)

import dataclasses
import logging
import math
import types
from pathlib import Path
from typing import Iterable
from typing import Mapping
from typing import Optional
from typing import Union

import numpy
from scipy import stats

from voicefair.audio import Embedding
from voicefair.audio import EmbeddingSource
from voicefair.audio import EmbeddingStore
from voicefair.dataset import AgeBucket
from voicefair.dataset import DatasetIndex
from voicefair.dataset import GroupKey
from voicefair.dataset import SpeakerRecord
from voicefair.dataset import TestRoster
from voicefair.dataset import UtteranceRef
from voicefair.errors import SynthError
from voicefair.utils import make_rng
from voicefair.utils import mix_seed
from .scoring import ScoreFile
from .scoring import ScoreRecord

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class ScoreParams:
    genuine_mean: float
    genuine_sd: float
    impostor_mean: float
    impostor_sd: float
    n_genuine: int
    n_impostor: int

    def __post_init__(self):
        if self.genuine_sd <= 0 or self.impostor_sd <= 0:
            raise SynthError(
                f"standard deviations must be positive, got {self.genuine_sd} "
                f"and {self.impostor_sd}"
            )
        if self.n_genuine < 1 or self.n_impostor < 1:
            raise SynthError(
                f"counts must be positive, got {self.n_genuine} and {self.n_impostor}"
            )

    @classmethod
    def from_separation(
        cls,
        separation: float,
        sd: float = 0.1,
        impostor_mean: float = 0.2,
        n: int = 1000,
    ) -> ScoreParams:
        """
        Equal-variance parameters whose means are ``separation`` standard deviations
        apart.
        """
        return cls(
            genuine_mean=impostor_mean + separation * sd,
            genuine_sd=sd,
            impostor_mean=impostor_mean,
            impostor_sd=sd,
            n_genuine=n,
            n_impostor=n,
        )


def expected_eer(params: ScoreParams) -> float:
    """
    Closed-form EER of two Gaussian score distributions, ignoring clamping.
    """
    separation = (params.genuine_mean - params.impostor_mean) / (
        params.genuine_sd + params.impostor_sd
    )
    return float(stats.norm.cdf(-separation))


@dataclasses.dataclass(frozen=True, eq=False)
class GroupScoreSpec:
    groups: Mapping[GroupKey, ScoreParams]

    @classmethod
    def uniform(cls, languages: Iterable[str], params: ScoreParams) -> GroupScoreSpec:
        """
        Same parameters for the four groups of every language.
        """
        return cls(
            groups=types.MappingProxyType(
                {
                    group: params
                    for language in languages
                    for group in GroupKey.all_for_language(language)
                }
            )
        )

    def with_group(self, group: GroupKey, params: ScoreParams) -> GroupScoreSpec:
        groups = dict(self.groups)
        groups[group] = params
        return GroupScoreSpec(groups=types.MappingProxyType(groups))


def synth_scores(spec: GroupScoreSpec, seed: int) -> ScoreFile:
    """
    Draw Gaussian genuine and impostor similarities for every group of the spec.

    Each group draws from its own generator derived from (seed, group). Values are
    clamped to [-1, 1].

    Returns:
        records grouped by group in canonical order, genuine first
    """
    records: list[ScoreRecord] = []
    clamped = 0
    for group in sorted(spec.groups, key=lambda key: key.sort_key):
        params = spec.groups[group]
        rng = make_rng(mix_seed(seed, "scores", group.qualified_label))
        genuine = rng.normal(params.genuine_mean, params.genuine_sd, params.n_genuine)
        impostor = rng.normal(params.impostor_mean, params.impostor_sd, params.n_impostor)

        for label, values in ((1, genuine), (0, impostor)):
            clipped = numpy.clip(values, -1.0, 1.0)
            clamped += int(numpy.count_nonzero(clipped != values))
            for value in clipped:
                records.append(
                    ScoreRecord(
                        pair_id=len(records),
                        label=label,
                        similarity=float(value),
                        group=group,
                    )
                )

    if clamped:
        logger.warning(f"[synth_scores] {clamped} similarities clamped to [-1, 1]")
    return ScoreFile(records=tuple(records), embedding_source="synthetic")


def _spread_of(
    group: GroupKey,
    spread: Union[float, Mapping[Union[GroupKey, str], float]],
) -> float:
    if not isinstance(spread, Mapping):
        return float(spread)
    for key in (group, group.qualified_label, group.label):
        if key in spread:
            return float(spread[key])
    raise SynthError(f"no spread given for group {group.qualified_label}")


def synth_embeddings(
    roster: TestRoster,
    dim: int,
    spread: Union[float, Mapping[Union[GroupKey, str], float]],
    seed: int,
    index: Optional[DatasetIndex] = None,
    n_utterances: int = 8,
) -> EmbeddingStore:
    """
    Clustered embeddings for every roster speaker.

    Each speaker gets a random unit-norm centroid; each utterance is that centroid
    plus Gaussian noise of standard deviation ``spread / sqrt(dim)``, so ``spread`` is
    the expected distance of an utterance to its centroid.

    Args:
        roster: speakers to embed
        dim: embedding dimension
        spread: spread of every group, or per group. Mapping keys can be GroupKey,
            qualified labels (``english/old-female``) or labels (``old-female``).
        seed: master seed, each speaker draws from a generator derived from it
        index: if given, embed the utterances of the index, else
            ``n_utterances`` utterances named ``utt000``, ``utt001``, ...
        n_utterances: utterances per speaker when no index is given

    Raises:
        SynthError: dim < 2, non-positive spread or a speaker missing from the index.
    """
    if dim < 2:
        raise SynthError(f"dim must be at least 2, got {dim}")
    if index is None and n_utterances < 1:
        raise SynthError(f"n_utterances must be positive, got {n_utterances}")

    entries = []
    for speaker_id in roster.ordered_speakers():
        group = roster.group_of[speaker_id]
        group_spread = _spread_of(group, spread)
        if group_spread <= 0:
            raise SynthError(
                f"spread must be positive, got {group_spread} for {group.qualified_label}"
            )
        if index is not None:
            if speaker_id not in index:
                raise SynthError(f"roster speaker '{speaker_id}' not in the index")
            utterance_ids = index[speaker_id].utterance_ids
        else:
            utterance_ids = tuple(f"utt{number:03d}" for number in range(n_utterances))

        rng = make_rng(mix_seed(seed, "embedding", speaker_id))
        centroid = rng.standard_normal(dim)
        centroid /= numpy.linalg.norm(centroid)
        noise = rng.normal(0.0, group_spread / math.sqrt(dim), (len(utterance_ids), dim))
        for utterance_id, vector in zip(utterance_ids, centroid + noise):
            entries.append(
                (
                    (speaker_id, utterance_id),
                    Embedding(vector=vector, source=EmbeddingSource.synthetic),
                )
            )

    logger.info(
        f"[synth_embeddings] {len(entries)} embeddings of dim {dim} "
        f"for {len(roster)} speakers"
    )
    return EmbeddingStore.from_entries(entries)


def synth_index(
    counts: Mapping[GroupKey, int],
    seed: int,
    utterances: tuple[int, int] = (5, 8),
    split_age: int = 40,
    audio_root: Union[str, Path] = "audio",
) -> DatasetIndex:
    """
    Speaker index with the given number of speakers per group.

    Speakers are named ``<language>-<label>-<number>``, ages are drawn on the right
    side of ``split_age`` and utterance counts uniformly in the ``utterances`` range
    (both ends included). Audio paths point to non-existing files under
    ``audio_root``.
    """
    low, high = utterances
    if not 1 <= low <= high:
        raise SynthError(f"invalid utterance range {utterances}")

    records = []
    for group in sorted(counts, key=lambda key: key.sort_key):
        rng = make_rng(mix_seed(seed, "index", group.qualified_label))
        for number in range(counts[group]):
            speaker_id = f"{group.language}-{group.label}-{number:04d}"
            if group.age_bucket is AgeBucket.young:
                age = int(rng.integers(max(0, split_age - 22), split_age))
            else:
                age = int(rng.integers(split_age, split_age + 40))
            n_utterances = int(rng.integers(low, high + 1))
            records.append(
                SpeakerRecord(
                    speaker_id=speaker_id,
                    language=group.language,
                    gender=group.gender,
                    age_years=age,
                    utterances=tuple(
                        UtteranceRef(
                            utterance_id=f"utt{position:03d}",
                            audio_path=Path(audio_root)
                            / speaker_id
                            / f"utt{position:03d}.wav",
                        )
                        for position in range(n_utterances)
                    ),
                )
            )

    languages = {group.language for group in counts}
    return DatasetIndex.from_records(records, languages=languages, split_age=split_age)
