import pytest

from voicefair.dataset import AgeBucket
from voicefair.dataset import Gender
from voicefair.dataset import GroupKey
from voicefair.dataset import SplitConfig
from voicefair.dataset import TestRoster
from voicefair.dataset import TrainRecipe
from voicefair.dataset import build_train_split
from voicefair.dataset import build_train_unbalanced
from voicefair.dataset import build_train_user_balanced
from voicefair.dataset import build_train_utterance_balanced
from voicefair.dataset import fold_seed
from voicefair.dataset import merge_indices
from voicefair.dataset import merge_language_splits
from voicefair.dataset import select_test_roster
from voicefair.errors import SplitError
from voicefair.evaluation import synth_index

OF, YF, OM, YM = GroupKey.all_for_language("spanish")

# speakers per group of the Spanish manifest after the 5 utterances filter
SPANISH_COUNTS = {OF: 306, YF: 180, OM: 376, YM: 418}


@pytest.fixture(scope="module")
def spanish_index():
    return synth_index(SPANISH_COUNTS, seed=3)


def _small_index(language="english", counts=(6, 4, 7, 5), seed=0):
    groups = GroupKey.all_for_language(language)
    return synth_index(dict(zip(groups, counts)), seed=seed)


def test_SplitConfig():
    SplitConfig(seed=0)
    SplitConfig(seed=2**64 - 1)
    with pytest.raises(SplitError):
        SplitConfig(seed=-1)
    with pytest.raises(SplitError):
        SplitConfig(seed=1, n_folds=0)
    with pytest.raises(SplitError):
        SplitConfig(seed=1, test_users_per_group=0)


def test_fold_seed():
    assert fold_seed(1234, 0) != fold_seed(1234, 1)
    assert fold_seed(1234, 2) == fold_seed(1234, 2)


def test_select_test_roster(spanish_index):
    cfg = SplitConfig(seed=1234)
    roster = select_test_roster(spanish_index, cfg, fold=0)

    assert len(roster) == 100
    assert roster.languages == ("spanish",)
    for group, speakers in roster.members.items():
        assert len(speakers) == 25
        assert list(speakers) == sorted(speakers)
        assert all(spanish_index.group_of[speaker] == group for speaker in speakers)

    assert roster == select_test_roster(spanish_index, cfg, fold=0)
    other_fold = select_test_roster(spanish_index, cfg, fold=1)
    assert other_fold.fold_id == 1
    assert other_fold.speaker_ids != roster.speaker_ids


def test_select_test_roster_row_order(spanish_index):
    cfg = SplitConfig(seed=1234)
    reversed_index = spanish_index.with_records(
        reversed(list(spanish_index.records.values()))
    )
    assert select_test_roster(reversed_index, cfg, 2) == select_test_roster(
        spanish_index, cfg, 2
    )


def test_select_test_roster_errors():
    index = _small_index(counts=(6, 2, 7, 5))
    with pytest.raises(SplitError, match="young-female has 2 speakers, 3 required"):
        select_test_roster(index, SplitConfig(seed=1, test_users_per_group=3), 0)
    with pytest.raises(SplitError, match="fold 3 outside"):
        select_test_roster(index, SplitConfig(seed=1, test_users_per_group=1), 3)


def test_select_test_roster_languages_independent():
    english = _small_index("english")
    spanish = _small_index("spanish", seed=1)
    cfg = SplitConfig(seed=99, test_users_per_group=2)
    merged = select_test_roster(merge_indices([english, spanish]), cfg, 0)
    alone = select_test_roster(english, cfg, 0)
    assert merged.ordered_speakers("english") == alone.ordered_speakers()


def test_TestRoster_text():
    config = SplitConfig(seed=5, test_users_per_group=2)
    roster = select_test_roster(_small_index(), config, 0)
    text = roster.to_text()
    assert text.splitlines()[0] == "speaker_id,language,gender,age_bucket"
    # canonical group order
    assert text.splitlines()[1].endswith("english,female,old")
    assert TestRoster.from_text(text, fold_id=0) == roster

    with pytest.raises(SplitError, match="different sizes"):
        TestRoster.from_text(text + "extra,english,male,young\n", fold_id=0)


def test_build_train_user_balanced_spanish(spanish_index):
    cfg = SplitConfig(seed=1234)
    split = build_train_user_balanced(spanish_index, TestRoster.empty(), cfg)
    assert split.speaker_counts() == {OF: 180, YF: 180, OM: 180, YM: 180}
    assert len(split.speaker_ids) == 720
    # every utterance of the selected speakers is kept
    for speaker_id in split.speaker_ids:
        items = [item for item in split.items if item.speaker_id == speaker_id]
        assert len(items) == len(spanish_index[speaker_id].utterances)

    roster = select_test_roster(spanish_index, cfg, 0)
    split = build_train_user_balanced(spanish_index, roster, cfg)
    assert split.speaker_counts() == {OF: 155, YF: 155, OM: 155, YM: 155}
    assert not split.speaker_ids & roster.speaker_ids
    assert split.identifier == "SPANISH TRAIN 1"


def test_build_train_user_balanced_deterministic(spanish_index):
    cfg = SplitConfig(seed=77)
    roster = select_test_roster(spanish_index, cfg, 1)
    first = build_train_user_balanced(spanish_index, roster, cfg)
    second = build_train_user_balanced(spanish_index, roster, cfg)
    assert first.to_text() == second.to_text()

    other = build_train_user_balanced(spanish_index, roster, SplitConfig(seed=78))
    assert other.to_text() != first.to_text()


def test_build_train_user_balanced_empty_group():
    index = _small_index(counts=(2, 2, 3, 2))
    cfg = SplitConfig(seed=1, test_users_per_group=2)
    roster = select_test_roster(index, cfg, 0)
    with pytest.raises(SplitError, match="empty after test exclusion"):
        build_train_user_balanced(index, roster, cfg)


def test_build_train_user_balanced_multi_language():
    english = _small_index("english", counts=(6, 4, 7, 5))
    spanish = _small_index("spanish", counts=(9, 8, 9, 3), seed=2)
    index = merge_indices([english, spanish])
    split = build_train_user_balanced(index, TestRoster.empty(), SplitConfig(seed=1))
    # the smallest per-language count caps every group of both languages
    assert set(split.speaker_counts().values()) == {3}
    assert len(split.speaker_counts()) == 8
    assert split.identifier == "ENGLISH-SPANISH TRAIN 1"


def test_build_train_unbalanced(spanish_index):
    cfg = SplitConfig(seed=1234)
    roster = select_test_roster(spanish_index, cfg, 0)
    split = build_train_unbalanced(spanish_index, roster)
    assert split.speaker_counts() == {OF: 281, YF: 155, OM: 351, YM: 393}
    assert not split.speaker_ids & roster.speaker_ids
    assert split.recipe is TrainRecipe.unbalanced


def test_build_train_utterance_balanced():
    index = _small_index(counts=(6, 4, 7, 5))
    cfg = SplitConfig(seed=3, test_users_per_group=1)
    roster = select_test_roster(index, cfg, 0)
    split = build_train_utterance_balanced(index, roster, cfg)

    counts = split.utterance_counts()
    assert len(set(counts.values())) == 1
    remaining = {
        group: sum(
            len(index[speaker].utterances)
            for speaker in index.group_index[group]
            if speaker not in roster.speaker_ids
        )
        for group in index.groups()
    }
    assert set(counts.values()) == {min(remaining.values())}
    assert not split.speaker_ids & roster.speaker_ids
    assert len(set((item.speaker_id, item.utterance_id) for item in split.items)) == len(
        split.items
    )


def test_build_train_split_dispatch():
    index = _small_index()
    cfg = SplitConfig(seed=3, test_users_per_group=1)
    roster = select_test_roster(index, cfg, 0)
    for recipe in TrainRecipe:
        split = build_train_split(index, roster, cfg, recipe)
        assert split.recipe is recipe
        assert split.identifier == f"ENGLISH TRAIN {recipe.value}"


def test_TrainSplit_text():
    index = _small_index()
    split = build_train_unbalanced(index, TestRoster.empty())
    lines = split.to_text().splitlines()
    assert lines[0] == "speaker_id,utterance_id,language,gender,age_bucket"
    assert len(lines) == len(split.items) + 1
    assert lines[1:] == sorted(lines[1:])


def test_merge_language_splits():
    english = _small_index("english", counts=(6, 4, 7, 5))
    spanish = _small_index("spanish", counts=(9, 8, 9, 3), seed=2)
    cfg = SplitConfig(seed=1)
    english_split = build_train_user_balanced(english, TestRoster.empty(), cfg)
    spanish_split = build_train_user_balanced(spanish, TestRoster.empty(), cfg)
    assert set(english_split.speaker_counts().values()) == {4}

    merged = merge_language_splits([english_split, spanish_split], seed=1)
    assert set(merged.speaker_counts().values()) == {3}
    assert merged.languages == frozenset(("english", "spanish"))

    unbalanced = merge_language_splits(
        [
            build_train_unbalanced(english, TestRoster.empty()),
            build_train_unbalanced(spanish, TestRoster.empty()),
        ]
    )
    assert sum(unbalanced.speaker_counts().values()) == len(english) + len(spanish)

    with pytest.raises(SplitError, match="different recipes"):
        merge_language_splits([english_split, unbalanced])
    with pytest.raises(SplitError, match="several splits"):
        merge_language_splits([english_split, english_split])
    with pytest.raises(SplitError):
        merge_language_splits([])


def test_GroupKey_age_bucket():
    assert OF == GroupKey("spanish", Gender.female, AgeBucket.old)
    assert YM == GroupKey("spanish", Gender.male, AgeBucket.young)
