"""
Verification error rates and the disparity of those rates between demographic groups.

A trial is accepted when its similarity is greater or equal to the threshold:

- FAR = accepted impostor pairs / impostor pairs
- FRR = rejected genuine pairs / genuine pairs

The Equal Error Rate is read at the candidate threshold minimizing ``|FAR - FRR|``
(lowest threshold on ties) as the midpoint of both rates. Candidate thresholds are
the distinct similarities plus one value just above the maximum.
"""
from __future__ import annotations

__all__ = (
    "SLICES",
    "MARGINAL_SLICES",
    "GROUP_SLICES",
    "RocPoint",
    "EerResult",
    "SliceMetrics",
    "GroupMetrics",
    "DisparityReport",
    "TTestResult",
    "candidate_thresholds",
    "sweep_roc",
    "compute_eer",
    "far_at",
    "frr_at",
    "disparity",
    "evaluate",
    "paired_ttest",
    "compare_folds",
    "epoch_series",
    "disparity_series",
)

import dataclasses
import itertools
import logging
import math
import types
from typing import Callable
from typing import Mapping
from typing import Sequence
from typing import Union

import numpy
from scipy import stats

from voicefair.dataset import AgeBucket
from voicefair.dataset import Gender
from voicefair.dataset import GroupKey
from voicefair.errors import MetricsError
from .scoring import ScoreFile
from .scoring import ScoreRecord

logger = logging.getLogger(__name__)

Records = Union[ScoreFile, Sequence[ScoreRecord]]

OVERALL = "overall"

MARGINAL_SLICES: dict[str, Callable[[GroupKey], bool]] = {
    "old": lambda group: group.age_bucket is AgeBucket.old,
    "young": lambda group: group.age_bucket is AgeBucket.young,
    "female": lambda group: group.gender is Gender.female,
    "male": lambda group: group.gender is Gender.male,
}
"""
Slices required by :func:`evaluate`, by name.
"""

GROUP_SLICES: dict[str, Callable[[GroupKey], bool]] = {
    f"{age_bucket.value}-{gender.value}": (
        lambda group, gender=gender, age_bucket=age_bucket: group.gender is gender
        and group.age_bucket is age_bucket
    )
    for gender, age_bucket in (
        (Gender.female, AgeBucket.old),
        (Gender.female, AgeBucket.young),
        (Gender.male, AgeBucket.old),
        (Gender.male, AgeBucket.young),
    )
}
"""
(gender, age bucket) cells, evaluated when they hold both classes.
"""

SLICES = (OVERALL,) + tuple(MARGINAL_SLICES)
"""
Slices followed by :func:`epoch_series`.
"""


@dataclasses.dataclass(frozen=True)
class RocPoint:
    threshold: float
    far: float
    frr: float


@dataclasses.dataclass(frozen=True)
class EerResult:
    eer: float
    threshold: float
    far_at_t: float
    frr_at_t: float


def _split_scores(records: Records) -> tuple[numpy.ndarray, numpy.ndarray]:
    """
    Sorted genuine and impostor similarities.
    """
    if isinstance(records, ScoreFile):
        labels = records.labels
        similarities = records.similarities
    else:
        labels = numpy.array([record.label for record in records], dtype=int)
        similarities = numpy.array(
            [record.similarity for record in records], dtype=numpy.float64
        )
    genuine = numpy.sort(similarities[labels == 1])
    impostor = numpy.sort(similarities[labels == 0])
    return genuine, impostor


def _require_classes(genuine: numpy.ndarray, impostor: numpy.ndarray, what: str):
    if not genuine.size:
        raise MetricsError(f"{what}: no genuine record")
    if not impostor.size:
        raise MetricsError(f"{what}: no impostor record")


def candidate_thresholds(similarities: numpy.ndarray) -> numpy.ndarray:
    """
    Distinct similarities in increasing order followed by a sentinel above the maximum.
    """
    distinct = numpy.unique(similarities)
    return numpy.append(distinct, numpy.nextafter(distinct[-1], numpy.inf))


def _rates(
    genuine: numpy.ndarray,
    impostor: numpy.ndarray,
    thresholds: numpy.ndarray,
) -> tuple[numpy.ndarray, numpy.ndarray]:
    """
    FAR and FRR at each threshold, from sorted genuine and impostor similarities.
    """
    accepted_impostors = impostor.size - numpy.searchsorted(impostor, thresholds, "left")
    rejected_genuines = numpy.searchsorted(genuine, thresholds, "left")
    return accepted_impostors / impostor.size, rejected_genuines / genuine.size


def _equal_error(genuine: numpy.ndarray, impostor: numpy.ndarray) -> EerResult:
    """
    EER point of sorted genuine and impostor similarities.

    ``|FAR - FRR|`` is compared scaled by both class sizes, as exact integers.
    """
    thresholds = candidate_thresholds(numpy.concatenate((genuine, impostor)))
    accepted_impostors = impostor.size - numpy.searchsorted(impostor, thresholds, "left")
    rejected_genuines = numpy.searchsorted(genuine, thresholds, "left")
    gaps = numpy.abs(
        accepted_impostors.astype(numpy.int64) * genuine.size
        - rejected_genuines.astype(numpy.int64) * impostor.size
    )
    # argmin returns the first, so lowest, threshold on ties
    position = int(numpy.argmin(gaps))
    far = accepted_impostors[position] / impostor.size
    frr = rejected_genuines[position] / genuine.size
    return EerResult(
        eer=float((far + frr) / 2),
        threshold=float(thresholds[position]),
        far_at_t=float(far),
        frr_at_t=float(frr),
    )


def _sweep(records: Records) -> tuple[numpy.ndarray, numpy.ndarray, numpy.ndarray]:
    genuine, impostor = _split_scores(records)
    _require_classes(genuine, impostor, "ROC sweep")
    thresholds = candidate_thresholds(numpy.concatenate((genuine, impostor)))
    far, frr = _rates(genuine, impostor, thresholds)
    return thresholds, far, frr


def sweep_roc(records: Records) -> list[RocPoint]:
    """
    FAR and FRR at every candidate threshold, by increasing threshold.

    Raises:
        MetricsError: if genuine or impostor records are missing.
    """
    thresholds, far, frr = _sweep(records)
    return [
        RocPoint(float(threshold), float(far_value), float(frr_value))
        for threshold, far_value, frr_value in zip(thresholds, far, frr)
    ]


def compute_eer(records: Records) -> EerResult:
    """
    Equal Error Rate of the given records, in [0, 1].

    Raises:
        MetricsError: if genuine or impostor records are missing.
    """
    genuine, impostor = _split_scores(records)
    _require_classes(genuine, impostor, "EER")
    return _equal_error(genuine, impostor)


def far_at(records: Records, threshold: float) -> float:
    _, impostor = _split_scores(records)
    if not impostor.size:
        raise MetricsError("FAR undefined without impostor record")
    return float(numpy.count_nonzero(impostor >= threshold) / impostor.size)


def frr_at(records: Records, threshold: float) -> float:
    genuine, _ = _split_scores(records)
    if not genuine.size:
        raise MetricsError("FRR undefined without genuine record")
    return float(numpy.count_nonzero(genuine < threshold) / genuine.size)


def disparity(eer_a: float, eer_b: float) -> float:
    """
    Disparity Score: absolute difference between the EERs of two groups.

    Works on any unit as long as both values share it.
    """
    return abs(eer_a - eer_b)


@dataclasses.dataclass(frozen=True)
class SliceMetrics:
    """
    Rates of one slice: its own EER, and FAR/FRR at the shared operating threshold.
    """

    eer: float
    far: float
    frr: float
    n_genuine: int
    n_impostor: int


@dataclasses.dataclass(frozen=True, eq=False)
class GroupMetrics:
    overall: EerResult
    slices: Mapping[str, SliceMetrics]

    @property
    def threshold(self) -> float:
        return self.overall.threshold

    @property
    def eer(self) -> float:
        return self.overall.eer

    @property
    def eer_old(self) -> float:
        return self.slices["old"].eer

    @property
    def eer_young(self) -> float:
        return self.slices["young"].eer

    @property
    def eer_female(self) -> float:
        return self.slices["female"].eer

    @property
    def eer_male(self) -> float:
        return self.slices["male"].eer

    def to_dict(self) -> dict:
        return {
            "overall": dataclasses.asdict(self.overall),
            "slices": {
                name: dataclasses.asdict(metrics) for name, metrics in self.slices.items()
            },
        }


@dataclasses.dataclass(frozen=True, eq=False)
class DisparityReport:
    """
    Disparities between the marginal slices, all as fractions in [0, 1].

    ``far_*`` and ``frr_*`` compare the rates of both slices at the overall EER
    threshold. ``pairwise`` holds the EER disparity of every pair of
    (gender, age bucket) cells, keyed by their sorted labels.
    """

    ds_young_old: float
    ds_male_female: float
    far_young_old: float
    far_male_female: float
    frr_young_old: float
    frr_male_female: float
    pairwise: Mapping[tuple[str, str], float] = dataclasses.field(
        default_factory=lambda: types.MappingProxyType({})
    )

    def to_dict(self) -> dict:
        return {
            "ds_young_old": self.ds_young_old,
            "ds_male_female": self.ds_male_female,
            "far_young_old": self.far_young_old,
            "far_male_female": self.far_male_female,
            "frr_young_old": self.frr_young_old,
            "frr_male_female": self.frr_male_female,
            "pairwise": {f"{a}|{b}": value for (a, b), value in self.pairwise.items()},
        }


def _slice_metrics(
    scorefile: ScoreFile,
    name: str,
    predicate: Callable[[GroupKey], bool],
    threshold: float,
) -> SliceMetrics:
    genuine, impostor = _split_scores(scorefile.select(predicate))
    _require_classes(genuine, impostor, f"slice '{name}'")
    shared_far, shared_frr = _rates(genuine, impostor, numpy.array([threshold]))
    return SliceMetrics(
        eer=_equal_error(genuine, impostor).eer,
        far=float(shared_far[0]),
        frr=float(shared_frr[0]),
        n_genuine=int(genuine.size),
        n_impostor=int(impostor.size),
    )


def evaluate(scorefile: ScoreFile) -> tuple[GroupMetrics, DisparityReport]:
    """
    Overall and per-slice error rates of a score file and their disparities.

    Slices are built from the group of the enrollment speaker of each pair.

    Raises:
        MetricsError: if a marginal slice (old, young, female, male) misses genuine
            or impostor records.
    """
    overall = compute_eer(scorefile)
    slices: dict[str, SliceMetrics] = {}
    for name, predicate in MARGINAL_SLICES.items():
        slices[name] = _slice_metrics(scorefile, name, predicate, overall.threshold)

    for name, predicate in GROUP_SLICES.items():
        try:
            slices[name] = _slice_metrics(scorefile, name, predicate, overall.threshold)
        except MetricsError:
            logger.debug(f"[evaluate] slice '{name}' skipped, a class is missing")

    metrics = GroupMetrics(overall=overall, slices=types.MappingProxyType(slices))

    cells = [name for name in GROUP_SLICES if name in slices]
    pairwise = {
        (a, b): disparity(slices[a].eer, slices[b].eer)
        for a, b in itertools.combinations(sorted(cells), 2)
    }
    report = DisparityReport(
        ds_young_old=disparity(slices["young"].eer, slices["old"].eer),
        ds_male_female=disparity(slices["male"].eer, slices["female"].eer),
        far_young_old=disparity(slices["young"].far, slices["old"].far),
        far_male_female=disparity(slices["male"].far, slices["female"].far),
        frr_young_old=disparity(slices["young"].frr, slices["old"].frr),
        frr_male_female=disparity(slices["male"].frr, slices["female"].frr),
        pairwise=types.MappingProxyType(pairwise),
    )
    logger.info(
        f"[evaluate] {scorefile.trial_id or 'scores'}: EER {overall.eer:.4f}, "
        f"DS Y/O {report.ds_young_old:.4f}, DS M/F {report.ds_male_female:.4f}"
    )
    return metrics, report


@dataclasses.dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: int
    p_value: float

    @property
    def significant_at_05(self) -> bool:
        return self.p_value < 0.05


def paired_ttest(xs: Sequence[float], ys: Sequence[float]) -> TTestResult:
    """
    Two-tailed paired Student t-test over ``d = xs - ys``.

    All-zero differences give ``p = 1``; constant nonzero differences give ``p = 0``
    with an infinite statistic.

    Raises:
        MetricsError: for samples of different lengths or shorter than 2.
    """
    xs = numpy.asarray(xs, dtype=numpy.float64)
    ys = numpy.asarray(ys, dtype=numpy.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise MetricsError(
            f"paired samples must be 1D of equal length, got {xs.shape} and {ys.shape}"
        )
    if xs.size < 2:
        raise MetricsError(f"paired t-test needs at least 2 pairs, got {xs.size}")

    differences = xs - ys
    degrees_of_freedom = differences.size - 1
    mean = differences.mean()
    deviation = differences.std(ddof=1)

    if deviation == 0:
        if mean == 0:
            return TTestResult(0.0, degrees_of_freedom, 1.0)
        return TTestResult(math.copysign(math.inf, mean), degrees_of_freedom, 0.0)

    t_statistic = mean / (deviation / math.sqrt(differences.size))
    p_value = 2 * stats.t.sf(abs(t_statistic), degrees_of_freedom)
    return TTestResult(
        float(t_statistic), degrees_of_freedom, float(min(max(p_value, 0.0), 1.0))
    )


def compare_folds(
    xs: Mapping[int, float],
    ys: Mapping[int, float],
) -> TTestResult:
    """
    Paired t-test between two configurations measured on the same folds.

    Args:
        xs: fold -> value of the first configuration
        ys: fold -> value of the second configuration

    Raises:
        MetricsError: if both mappings do not cover the same folds.
    """
    if set(xs) != set(ys):
        raise MetricsError(
            f"folds differ between configurations: {sorted(xs)} vs {sorted(ys)}"
        )
    folds = sorted(xs)
    result = paired_ttest([xs[fold] for fold in folds], [ys[fold] for fold in folds])
    logger.info(
        f"[compare_folds] {len(folds)} folds: t={result.t_statistic:.3f}, "
        f"p={result.p_value:.4f}"
    )
    return result


def epoch_series(scorefiles: Sequence[ScoreFile]) -> dict[str, dict[int, float]]:
    """
    EER of each slice of :data:`SLICES` at each epoch.

    Args:
        scorefiles: score files whose records are all tagged with the same epoch

    Returns:
        slice name -> {epoch: eer}, epochs in increasing order

    Raises:
        MetricsError: untagged file, duplicated epoch, or a non evaluable file.
    """
    if not scorefiles:
        raise MetricsError("no score file given")

    by_epoch: dict[int, ScoreFile] = {}
    for scorefile in scorefiles:
        epoch = scorefile.epoch
        if epoch is None:
            raise MetricsError(
                f"score file '{scorefile.trial_id}' is not tagged with a single epoch"
            )
        if epoch in by_epoch:
            raise MetricsError(f"epoch {epoch} given twice")
        by_epoch[epoch] = scorefile

    series: dict[str, dict[int, float]] = {name: {} for name in SLICES}
    for epoch in sorted(by_epoch):
        metrics, _ = evaluate(by_epoch[epoch])
        series[OVERALL][epoch] = metrics.eer
        for name in MARGINAL_SLICES:
            series[name][epoch] = metrics.slices[name].eer
    return series


def disparity_series(
    series: Mapping[str, Mapping[int, float]],
) -> dict[str, dict[int, float]]:
    """
    DS Y/O and DS M/F at each epoch of an :func:`epoch_series` result.
    """
    epochs = sorted(series["old"])
    return {
        "ds_young_old": {
            epoch: disparity(series["young"][epoch], series["old"][epoch])
            for epoch in epochs
        },
        "ds_male_female": {
            epoch: disparity(series["male"][epoch], series["female"][epoch])
            for epoch in epochs
        },
    }
