import dataclasses

import pytest

from voicefair.dataset import AgeBucket
from voicefair.dataset import Gender
from voicefair.dataset import GroupKey
from voicefair.dataset import SplitConfig
from voicefair.dataset import TestMode
from voicefair.dataset import TrialFile
from voicefair.dataset import ViolationKind
from voicefair.dataset import fold_seed
from voicefair.dataset import gen_trials
from voicefair.dataset import merge_indices
from voicefair.dataset import select_test_roster
from voicefair.dataset import validate_trials
from voicefair.errors import TrialError
from voicefair.evaluation import synth_index

SEED = fold_seed(1234, 0)


@pytest.fixture(scope="module")
def fixture_roster():
    """
    100 speakers, 25 per group, 5 to 8 utterances each.
    """
    groups = GroupKey.all_for_language("english")
    index = synth_index({group: 25 for group in groups}, seed=11)
    roster = select_test_roster(index, SplitConfig(seed=1234), fold=0)
    return roster, index


def test_TestMode_labels():
    assert [mode.label for mode in TestMode] == ["test1", "test2", "test3"]
    assert TestMode.from_label("test2") is TestMode.same_gender
    assert TestMode.from_label("3") is TestMode.random
    assert TestMode.from_label("Same_Age") is TestMode.same_age
    with pytest.raises(TrialError, match="unknown test mode"):
        TestMode.from_label("test4")


def test_TestMode_allows():
    of, yf, om, ym = GroupKey.all_for_language("english")
    spanish_of = GroupKey("spanish", Gender.female, AgeBucket.old)

    assert TestMode.same_age.allows(of, om)
    assert not TestMode.same_age.allows(of, yf)
    assert TestMode.same_gender.allows(of, yf)
    assert not TestMode.same_gender.allows(of, ym)
    assert TestMode.random.allows(of, ym)
    for mode in TestMode:
        assert not mode.allows(of, spanish_of)


@pytest.mark.parametrize("mode", list(TestMode))
def test_gen_trials_counts(fixture_roster, mode):
    roster, index = fixture_roster
    trials = gen_trials(roster, index, mode, SEED)

    assert len(trials) == 12800
    assert [pair.pair_id for pair in trials.pairs] == list(range(12800))
    assert sum(pair.is_genuine for pair in trials.pairs) == 6400
    assert trials.identifier == f"ENGLISH TEST {mode.number}"

    report = validate_trials(trials, roster, index)
    assert report.is_valid, [str(violation) for violation in report]

    regenerated = gen_trials(roster, index, mode, SEED)
    assert regenerated.to_text() == trials.to_text()


def test_gen_trials_pairs(fixture_roster):
    roster, index = fixture_roster
    trials = gen_trials(roster, index, TestMode.same_age, SEED, n_same=4, n_diff=3)
    first_speaker = roster.ordered_speakers()[0]
    first_pairs = trials.pairs[:7]

    assert [pair.label for pair in first_pairs] == [1, 1, 1, 1, 0, 0, 0]
    for pair in first_pairs:
        assert pair.enroll_speaker == first_speaker
        assert pair.group == roster.group_of[first_speaker]
    for pair in first_pairs[:4]:
        assert pair.probe_speaker == first_speaker
        assert pair.enroll_utt != pair.probe_utt
    for pair in first_pairs[4:]:
        partner = roster.group_of[pair.probe_speaker]
        assert partner.age_bucket == roster.group_of[first_speaker].age_bucket
    # genuine pairs drawn without replacement when enough exist
    assert len(set(first_pairs[:4])) == 4


def test_gen_trials_seed_and_order(fixture_roster):
    roster, index = fixture_roster
    trials = gen_trials(roster, index, TestMode.random, SEED, n_same=3, n_diff=3)
    other = gen_trials(roster, index, TestMode.random, SEED + 1, n_same=3, n_diff=3)
    assert trials.to_text() != other.to_text()

    # a speaker's pairs do not depend on the other speakers of the roster
    language_only = gen_trials(
        roster, index, TestMode.random, SEED, n_same=3, n_diff=3, language="english"
    )
    assert language_only.to_text() == trials.to_text()


def test_gen_trials_genuine_with_replacement():
    groups = GroupKey.all_for_language("english")
    index = synth_index({group: 2 for group in groups}, seed=1, utterances=(2, 2))
    roster = select_test_roster(index, SplitConfig(seed=1, test_users_per_group=2), 0)
    # a single candidate pair per speaker: drawn with replacement
    trials = gen_trials(roster, index, TestMode.random, SEED, n_same=3, n_diff=2)
    assert len(trials) == 8 * 5
    genuine = [pair for pair in trials.pairs[:5] if pair.is_genuine]
    assert len(genuine) == 3
    assert len(set((pair.enroll_utt, pair.probe_utt) for pair in genuine)) == 1
    assert validate_trials(trials, roster, index).is_valid


def test_gen_trials_errors(fixture_roster):
    roster, index = fixture_roster
    with pytest.raises(TrialError, match="not in roster"):
        gen_trials(roster, index, TestMode.random, SEED, language="spanish")
    with pytest.raises(TrialError, match="positive"):
        gen_trials(roster, index, TestMode.random, SEED, n_same=0)

    groups = GroupKey.all_for_language("english")
    single = synth_index({group: 1 for group in groups}, seed=1, utterances=(1, 1))
    single_roster = select_test_roster(
        single, SplitConfig(seed=1, test_users_per_group=1), 0
    )
    with pytest.raises(TrialError, match="at least 2 required"):
        gen_trials(single_roster, single, TestMode.random, SEED)


def test_gen_trials_no_partner():
    groups = GroupKey.all_for_language("english")
    index = synth_index({group: 1 for group in groups}, seed=1)
    roster = select_test_roster(index, SplitConfig(seed=1, test_users_per_group=1), 0)
    # same_age: the old-female speaker still has the old-male one
    gen_trials(roster, index, TestMode.same_age, SEED, n_same=2, n_diff=2)

    old_only = dataclasses.replace(
        roster,
        members={
            group: speakers
            for group, speakers in roster.members.items()
            if group.age_bucket is AgeBucket.old and group.gender is Gender.female
        },
    )
    with pytest.raises(TrialError, match="no eligible impostor partner"):
        gen_trials(old_only, index, TestMode.random, SEED, n_same=2, n_diff=2)


def test_gen_trials_partners_same_language():
    english = synth_index(
        {group: 3 for group in GroupKey.all_for_language("english")}, seed=1
    )
    spanish = synth_index(
        {group: 3 for group in GroupKey.all_for_language("spanish")}, seed=2
    )
    index = merge_indices([english, spanish])
    roster = select_test_roster(index, SplitConfig(seed=1, test_users_per_group=2), 0)
    trials = gen_trials(roster, index, TestMode.random, SEED, n_same=2, n_diff=5)

    assert trials.language == "english-spanish"
    for pair in trials.pairs:
        assert (
            roster.group_of[pair.enroll_speaker].language
            == roster.group_of[pair.probe_speaker].language
        )
    assert validate_trials(trials, roster, index).is_valid


def test_validate_trials_hyphenated_languages():
    index = merge_indices(
        [
            synth_index({group: 3 for group in GroupKey.all_for_language(language)}, seed)
            for seed, language in enumerate(("en-US", "es-MX"), start=1)
        ]
    )
    roster = select_test_roster(index, SplitConfig(seed=1, test_users_per_group=2), 0)

    trials = gen_trials(roster, index, TestMode.random, SEED, n_same=2, n_diff=2)
    assert trials.language == "en-US-es-MX"
    assert validate_trials(trials, roster, index).is_valid

    # every roster speaker is missing its pairs
    empty = dataclasses.replace(trials, pairs=())
    count = validate_trials(empty, roster, index).of_kind(ViolationKind.count)
    assert len(count) == 2 * len(roster)

    single = gen_trials(
        roster, index, TestMode.random, SEED, n_same=2, n_diff=2, language="es-MX"
    )
    empty = dataclasses.replace(single, pairs=())
    count = validate_trials(empty, roster, index).of_kind(ViolationKind.count)
    assert len(count) == 2 * len(roster.ordered_speakers("es-MX"))


def test_TrialFile_text(fixture_roster):
    roster, index = fixture_roster
    trials = gen_trials(roster, index, TestMode.same_gender, SEED, n_same=2, n_diff=2)
    text = trials.to_text()
    assert text.splitlines()[0] == (
        "pair_id,label,enroll_speaker,enroll_utt,probe_speaker,probe_utt,"
        "language,gender,age_bucket"
    )
    parsed = TrialFile.from_text(
        text, TestMode.same_gender, fold_id=0, n_same=2, n_diff=2
    )
    assert parsed == trials
    assert parsed.language == "english"
    assert parsed.utterance_keys[0] == trials.pairs[0].enroll_utt

    with pytest.raises(TrialError, match="row 2"):
        TrialFile.from_text(
            text.replace("\n0,1,", "\n0,7,", 1), TestMode.same_gender, fold_id=0
        )


def _tamper(trials: TrialFile, position: int, **changes) -> TrialFile:
    pairs = list(trials.pairs)
    pairs[position] = dataclasses.replace(pairs[position], **changes)
    return dataclasses.replace(trials, pairs=tuple(pairs))


def test_validate_trials_violations(fixture_roster):
    roster, index = fixture_roster
    trials = gen_trials(roster, index, TestMode.same_age, SEED, n_same=2, n_diff=2)
    assert validate_trials(trials, roster, index).is_valid

    speaker = trials.pairs[0].enroll_speaker
    # genuine pair against another speaker
    other = trials.pairs[2].probe_utt
    report = validate_trials(_tamper(trials, 0, probe_utt=other), roster, index)
    assert report.of_kind(ViolationKind.label)

    # impostor partner from the other age bucket
    young = next(
        speaker_id
        for speaker_id in roster.ordered_speakers()
        if roster.group_of[speaker_id].age_bucket
        is not roster.group_of[speaker].age_bucket
    )
    young_utt = (young, index[young].utterance_ids[0])
    report = validate_trials(_tamper(trials, 2, probe_utt=young_utt), roster, index)
    assert len(report.of_kind(ViolationKind.mode)) == 1
    assert report.of_kind(ViolationKind.mode)[0].pair_id == 2

    # utterance unknown to the index
    report = validate_trials(
        _tamper(trials, 1, probe_utt=(speaker, "ghost")), roster, index
    )
    assert report.of_kind(ViolationKind.missing_utterance)

    # speaker outside the roster
    report = validate_trials(
        _tamper(trials, 3, probe_utt=("stranger", "utt000")), roster, index
    )
    assert report.of_kind(ViolationKind.unknown_speaker)

    # wrong group recorded on the pair
    wrong = GroupKey("english", Gender.male, AgeBucket.young)
    if roster.group_of[speaker] == wrong:
        wrong = GroupKey("english", Gender.female, AgeBucket.old)
    report = validate_trials(_tamper(trials, 0, group=wrong), roster, index)
    assert report.of_kind(ViolationKind.group_mismatch)

    # a dropped pair breaks the per-speaker counts
    dropped = dataclasses.replace(trials, pairs=trials.pairs[1:])
    report = validate_trials(dropped, roster, index)
    count = report.of_kind(ViolationKind.count)
    assert len(count) == 1
    assert count[0].speaker_id == speaker
    assert "has 1 genuine pairs, expected 2" in count[0].message
