import math
from fractions import Fraction

import numpy
import pytest
from numpy.testing import assert_array_equal

from voicefair.dataset import GroupKey
from voicefair.errors import MetricsError
from voicefair.evaluation import GROUP_SLICES
from voicefair.evaluation import SLICES
from voicefair.evaluation import GroupScoreSpec
from voicefair.evaluation import ScoreFile
from voicefair.evaluation import ScoreParams
from voicefair.evaluation import ScoreRecord
from voicefair.evaluation import candidate_thresholds
from voicefair.evaluation import compare_folds
from voicefair.evaluation import compute_eer
from voicefair.evaluation import disparity
from voicefair.evaluation import disparity_series
from voicefair.evaluation import epoch_series
from voicefair.evaluation import evaluate
from voicefair.evaluation import far_at
from voicefair.evaluation import frr_at
from voicefair.evaluation import paired_ttest
from voicefair.evaluation import sweep_roc
from voicefair.evaluation import synth_scores

OF, YF, OM, YM = GroupKey.all_for_language("english")

# (EER a, EER b, published DS) percentages of published result tables
DISPARITY_DATASET = {
    "english-train-1-test-1-age": (5.80, 7.75, 1.95),
    "english-train-1-test-1-gender": (4.48, 8.75, 4.27),
    "spanish-age": (4.69, 11.66, 6.97),
    "multi-language-age": (4.50, 10.50, 6.00),
    "epoch-age": (5.23, 7.55, 2.32),
}


def _records(genuine, impostor, group=OF):
    values = [(1, value) for value in genuine] + [(0, value) for value in impostor]
    return ScoreFile(
        records=tuple(
            ScoreRecord(pair_id, label, float(value), group)
            for pair_id, (label, value) in enumerate(values)
        )
    )


def _random_records(rng, size, rounded=False):
    labels = rng.integers(0, 2, size)
    labels[0], labels[1] = 0, 1
    values = rng.uniform(-1, 1, size)
    if rounded:
        values = numpy.round(values, 1)
    groups = (OF, YF, OM, YM)
    return tuple(
        ScoreRecord(pair_id, int(label), float(value), groups[pair_id % 4])
        for pair_id, (label, value) in enumerate(zip(labels, values))
    )


def _brute_force_eer(records):
    genuine = [record.similarity for record in records if record.label == 1]
    impostor = [record.similarity for record in records if record.label == 0]
    values = sorted({record.similarity for record in records})
    values.append(numpy.nextafter(values[-1], numpy.inf))
    best = None
    for threshold in values:
        accepted = sum(int(value >= threshold) for value in impostor)
        rejected = sum(int(value < threshold) for value in genuine)
        far = Fraction(accepted, len(impostor))
        frr = Fraction(rejected, len(genuine))
        if best is None or abs(far - frr) < best[0]:
            best = (abs(far - frr), (far + frr) / 2, threshold)
    return best[1], best[2]


@pytest.mark.parametrize("name", list(DISPARITY_DATASET))
def test_disparity_published(name):
    first, second, expected = DISPARITY_DATASET[name]
    assert disparity(first, second) == pytest.approx(expected, abs=0.01)
    assert disparity(second, first) == disparity(first, second)


def test_candidate_thresholds():
    thresholds = candidate_thresholds(numpy.array([0.5, 0.1, 0.5, 0.9]))
    assert_array_equal(thresholds[:3], [0.1, 0.5, 0.9])
    assert thresholds[3] > 0.9
    assert thresholds.size == 4


def test_compute_eer():
    records = _records([0.9, 0.8, 0.7, 0.4], [0.6, 0.5, 0.3, 0.1])
    result = compute_eer(records)
    assert result.eer == 0.25
    assert result.threshold == 0.6
    assert result.far_at_t == 0.25
    assert result.frr_at_t == 0.25


def test_compute_eer_tie_lowest_threshold():
    # |FAR - FRR| is 0.5 at both 0.5 and 0.7
    result = compute_eer(_records([0.5], [0.3, 0.7]))
    assert result.threshold == 0.5
    assert result.eer == 0.25


def test_compute_eer_tie_exact_rates():
    # |FAR - FRR| is 2/3 at 0.7 and 0.8, with rates of different denominators
    result = compute_eer(_records([0.6, 0.7, 0.8], [0.7]))
    assert result.threshold == 0.7
    assert result.far_at_t == 1.0
    assert result.frr_at_t == pytest.approx(1 / 3)
    assert result.eer == pytest.approx(2 / 3)


def test_compute_eer_tie_rounded_scores():
    rng = numpy.random.default_rng(29)
    for _ in range(600):
        size = int(rng.integers(2, 12))
        records = _random_records(rng, size, rounded=True)
        eer, threshold = _brute_force_eer(records)
        result = compute_eer(records)
        assert result.threshold == threshold
        assert result.eer == pytest.approx(float(eer), abs=1e-12)


def test_compute_eer_separable():
    result = compute_eer(_records([0.9, 0.6], [0.3, 0.1]))
    assert result.eer == 0.0
    assert result.threshold == 0.6


def test_compute_eer_errors():
    with pytest.raises(MetricsError, match="no impostor"):
        compute_eer(_records([0.9, 0.6], []))
    with pytest.raises(MetricsError, match="no genuine"):
        compute_eer(_records([], [0.2]))


def test_compute_eer_brute_force_oracle():
    rng = numpy.random.default_rng(2024)
    for iteration in range(1000):
        size = int(rng.integers(3, 201))
        records = _random_records(rng, size, rounded=iteration % 3 == 0)
        result = compute_eer(records)
        eer, threshold = _brute_force_eer(records)
        assert result.eer == pytest.approx(float(eer), abs=1e-12)
        assert result.threshold == threshold


def test_sweep_roc_monotonic_and_rank_invariant():
    rng = numpy.random.default_rng(7)
    for iteration in range(200):
        size = int(rng.integers(20, 201))
        records = _random_records(rng, size, rounded=iteration % 2 == 0)
        points = sweep_roc(records)
        far = numpy.array([point.far for point in points])
        frr = numpy.array([point.frr for point in points])
        assert numpy.all(numpy.diff(far) <= 0)
        assert numpy.all(numpy.diff(frr) >= 0)
        assert far[0] == 1.0
        assert far[-1] == 0.0 and frr[-1] == 1.0

        transformed = tuple(
            ScoreRecord(
                record.pair_id,
                record.label,
                (record.similarity**3 + record.similarity) / 2,
                record.group,
            )
            for record in records
        )
        assert compute_eer(transformed).eer == compute_eer(records).eer

        scorefile = ScoreFile(records=records)
        try:
            _, report = evaluate(scorefile)
        except MetricsError:
            continue
        _, transformed_report = evaluate(ScoreFile(records=transformed))
        assert transformed_report.ds_young_old == report.ds_young_old
        assert transformed_report.ds_male_female == report.ds_male_female


def test_far_frr_at():
    records = _records([0.9, 0.8, 0.7, 0.4], [0.6, 0.5, 0.3, 0.1])
    assert far_at(records, 0.5) == 0.5
    assert frr_at(records, 0.5) == 0.25
    # acceptance is inclusive
    assert far_at(records, 0.6) == 0.25
    assert frr_at(records, 0.4) == 0.0

    with pytest.raises(MetricsError):
        far_at(_records([0.5], []), 0.5)


def test_evaluate():
    spec = GroupScoreSpec.uniform(["english"], ScoreParams.from_separation(3.0, n=400))
    spec = spec.with_group(YM, ScoreParams.from_separation(0.5, n=400))
    metrics, report = evaluate(synth_scores(spec, seed=3))

    assert set(metrics.slices) == set(SLICES[1:]) | set(GROUP_SLICES)
    assert metrics.slices["old"].n_genuine == 800
    assert metrics.slices["young-male"].n_impostor == 400
    assert metrics.eer_young > metrics.eer_old
    assert metrics.eer_male > metrics.eer_female
    assert report.ds_young_old == disparity(metrics.eer_young, metrics.eer_old)
    assert report.ds_male_female == disparity(metrics.eer_male, metrics.eer_female)
    assert len(report.pairwise) == 6
    assert report.pairwise[("old-female", "young-male")] > report.pairwise[
        ("old-female", "old-male")
    ]

    # FAR and FRR of the slices are read at the overall threshold
    old = synth_scores(spec, seed=3).select(
        lambda group: group.age_bucket is OF.age_bucket
    )
    assert metrics.slices["old"].far == far_at(old, metrics.threshold)
    assert metrics.slices["old"].frr == frr_at(old, metrics.threshold)

    document = report.to_dict()
    assert document["pairwise"]["old-female|young-male"] == report.pairwise[
        ("old-female", "young-male")
    ]
    assert metrics.to_dict()["overall"]["eer"] == metrics.eer


def test_evaluate_missing_slice():
    params = ScoreParams.from_separation(2, n=20)
    spec = GroupScoreSpec(groups={OF: params, OM: params})
    with pytest.raises(MetricsError, match="slice 'young'"):
        evaluate(synth_scores(spec, seed=1))


def test_evaluate_skips_incomplete_cells():
    spec = GroupScoreSpec.uniform(["english"], ScoreParams.from_separation(2, n=30))
    records = list(synth_scores(spec, seed=1).records)
    # young-male loses its impostor pairs
    records = [
        record for record in records if not (record.group == YM and record.label == 0)
    ]
    metrics, report = evaluate(ScoreFile(records=tuple(records)))
    assert "young-male" not in metrics.slices
    assert "old-female" in metrics.slices
    assert len(report.pairwise) == 3


def test_paired_ttest():
    result = paired_ttest([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
    assert result.t_statistic == pytest.approx(2 / (1 / math.sqrt(3)), abs=1e-3)
    assert result.t_statistic == pytest.approx(3.464, abs=1e-3)
    assert result.degrees_of_freedom == 2
    assert result.p_value == pytest.approx(0.0742, abs=1e-3)
    assert not result.significant_at_05

    same = paired_ttest([1.95, 4.27, 6.97], [1.95, 4.27, 6.97])
    assert same.p_value == 1.0
    assert same.t_statistic == 0.0
    assert not same.significant_at_05

    shifted = paired_ttest([2.0, 3.0, 4.0], [1.0, 2.0, 3.0])
    assert shifted.p_value == 0.0
    assert shifted.t_statistic == math.inf

    with pytest.raises(MetricsError, match="equal length"):
        paired_ttest([1.0, 2.0], [1.0])
    with pytest.raises(MetricsError, match="at least 2"):
        paired_ttest([1.0], [2.0])


def test_compare_folds():
    result = compare_folds({0: 3.0, 1: 4.0, 2: 5.0}, {2: 0.0, 0: 2.0, 1: 2.0})
    # differences by fold: 1, 2, 5
    expected = paired_ttest([3.0, 4.0, 5.0], [2.0, 2.0, 0.0])
    assert result == expected

    with pytest.raises(MetricsError, match="folds differ"):
        compare_folds({0: 1.0, 1: 2.0}, {0: 1.0, 2: 2.0})


def test_epoch_series():
    spec = GroupScoreSpec.uniform(["english"], ScoreParams.from_separation(2.0, n=100))
    scorefiles = [synth_scores(spec, seed=epoch).with_epoch(epoch) for epoch in (3, 1, 2)]
    series = epoch_series(scorefiles)

    assert set(series) == set(SLICES)
    assert list(series["overall"]) == [1, 2, 3]
    metrics, _ = evaluate(scorefiles[1])
    assert series["overall"][1] == metrics.eer
    assert series["young"][1] == metrics.eer_young

    ds = disparity_series(series)
    assert ds["ds_young_old"][2] == disparity(series["young"][2], series["old"][2])
    assert list(ds["ds_male_female"]) == [1, 2, 3]

    with pytest.raises(MetricsError, match="not tagged"):
        epoch_series([synth_scores(spec, seed=1)])
    with pytest.raises(MetricsError, match="epoch 1 given twice"):
        epoch_series([scorefiles[1], scorefiles[1]])
