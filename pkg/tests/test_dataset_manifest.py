from pathlib import Path

import pytest

from voicefair.dataset import AgeBucket
from voicefair.dataset import DatasetIndex
from voicefair.dataset import Gender
from voicefair.dataset import GroupKey
from voicefair.dataset import SpeakerRecord
from voicefair.dataset import UtteranceRef
from voicefair.dataset import assign_group
from voicefair.dataset import filter_min_utterances
from voicefair.dataset import group_counts
from voicefair.dataset import load_manifest
from voicefair.dataset import merge_indices
from voicefair.dataset import write_manifest
from voicefair.errors import ManifestError


MANIFEST = """speaker_id,gender,age,utterance_path,accent
spk1,female,39,spk1/a.wav,x
spk1,female,39,spk1/b.wav,x
spk2,M,40,spk2/a.wav,y
spk3,f,62,/abs/spk3/a.wav,z
spk2,male,40,spk2/b.wav,y
"""


def _write(tmp_path: Path, content: str, name="manifest.csv") -> Path:
    path = tmp_path / name
    path.write_text(content, encoding="utf-8")
    return path


def _record(speaker_id, gender, age, n_utterances=1, language="english"):
    return SpeakerRecord(
        speaker_id=speaker_id,
        language=language,
        gender=gender,
        age_years=age,
        utterances=tuple(
            UtteranceRef(f"u{number}", Path(f"{speaker_id}/u{number}.wav"))
            for number in range(n_utterances)
        ),
    )


def test_Gender_parse():
    assert Gender.parse("F") is Gender.female
    assert Gender.parse(" male ") is Gender.male
    with pytest.raises(ManifestError, match="unrecognized gender"):
        Gender.parse("other")


def test_assign_group():
    assert assign_group(_record("a", Gender.female, 39)).age_bucket is AgeBucket.young
    # the boundary belongs to the old bucket
    assert assign_group(_record("a", Gender.female, 40)).age_bucket is AgeBucket.old
    assert assign_group(_record("a", Gender.male, 25), split_age=20) == GroupKey(
        "english", Gender.male, AgeBucket.old
    )


def test_GroupKey():
    groups = GroupKey.all_for_language("english")
    assert [group.label for group in groups] == [
        "old-female",
        "young-female",
        "old-male",
        "young-male",
    ]
    assert groups[0].qualified_label == "english/old-female"
    shuffled = [groups[3], groups[1], groups[0], groups[2]]
    assert sorted(shuffled, key=lambda group: group.sort_key) == list(groups)
    assert GroupKey.from_fields("english", "male", "young") == groups[3]
    with pytest.raises(ManifestError):
        GroupKey.from_fields("english", "male", "middle")


def test_load_manifest(tmp_path):
    path = _write(tmp_path, MANIFEST)
    index = load_manifest(path, "english")

    assert list(index.records) == ["spk1", "spk2", "spk3"]
    assert index.languages == ("english",)
    assert index["spk1"].utterance_ids == ("a", "b")
    assert index["spk1"].utterances[0].audio_path == tmp_path / "spk1" / "a.wav"
    assert index["spk3"].utterances[0].audio_path == Path("/abs/spk3/a.wav")
    # utterances keep row order even when rows of a speaker are not contiguous
    assert index["spk2"].utterance_ids == ("a", "b")

    assert index.group_of["spk1"] == GroupKey("english", Gender.female, AgeBucket.young)
    assert index.group_of["spk2"] == GroupKey("english", Gender.male, AgeBucket.old)
    assert index.group_of["spk3"] == GroupKey("english", Gender.female, AgeBucket.old)


def test_load_manifest_data_root(tmp_path):
    path = _write(tmp_path, MANIFEST)
    index = load_manifest(path, "english", data_root="/data/voices")
    assert index["spk1"].utterances[1].audio_path == Path("/data/voices/spk1/b.wav")


def test_load_manifest_utterance_id_column(tmp_path):
    content = "speaker_id;utterance_id;gender;age;utterance_path\ns;u7;m;30;x/y.wav\n"
    path = _write(tmp_path, content)
    index = load_manifest(path, "spanish", delimiter=";")
    assert index["s"].utterance_ids == ("u7",)


@pytest.mark.parametrize(
    "content,message",
    [
        ("speaker_id,gender,utterance_path\na,f,x.wav\n", "missing required column 'age'"),
        (
            "speaker_id,gender,age,utterance_path\na,f,30,x.wav\nb,f,old,y.wav\n",
            "row 3: unparsable age 'old'",
        ),
        (
            "speaker_id,gender,age,utterance_path\na,x,30,x.wav\n",
            "row 2: unrecognized gender token 'x'",
        ),
        (
            "speaker_id,gender,age,utterance_path\na,f,30,x.wav\na,f,31,y.wav\n",
            "row 3: speaker 'a' declared as",
        ),
        (
            "speaker_id,gender,age,utterance_path\na,f,30,d/x.wav\na,f,30,e/x.wav\n",
            "row 3: duplicate utterance 'x'",
        ),
        ("speaker_id,gender,age,utterance_path\na,f,-2,x.wav\n", "negative age"),
    ],
)
def test_load_manifest_errors(tmp_path, content, message):
    path = _write(tmp_path, content)
    with pytest.raises(ManifestError, match=message):
        load_manifest(path, "english")


def test_load_manifest_missing(tmp_path):
    with pytest.raises(ManifestError, match="manifest not found"):
        load_manifest(tmp_path / "nope.csv", "english")


def test_filter_min_utterances():
    index = DatasetIndex.from_records(
        [
            _record("a", Gender.female, 30, 5),
            _record("b", Gender.female, 30, 4),
            _record("c", Gender.male, 50, 7),
        ]
    )
    filtered = filter_min_utterances(index, 5)
    assert list(filtered.records) == ["a", "c"]

    # every speaker filtered: empty index, groups still reported
    empty = filter_min_utterances(index, 10)
    assert len(empty) == 0
    assert set(group_counts(empty).values()) == {0}
    assert len(group_counts(empty)) == 4

    with pytest.raises(ManifestError):
        filter_min_utterances(index, 0)


def test_group_counts():
    index = DatasetIndex.from_records(
        [
            _record("a", Gender.female, 30),
            _record("b", Gender.female, 31),
            _record("c", Gender.male, 50),
        ]
    )
    counts = group_counts(index)
    assert counts == {
        GroupKey("english", Gender.female, AgeBucket.old): 0,
        GroupKey("english", Gender.female, AgeBucket.young): 2,
        GroupKey("english", Gender.male, AgeBucket.old): 1,
        GroupKey("english", Gender.male, AgeBucket.young): 0,
    }


def test_merge_indices():
    english = DatasetIndex.from_records([_record("a", Gender.female, 30)])
    spanish = DatasetIndex.from_records(
        [_record("b", Gender.male, 30, language="spanish")]
    )
    merged = merge_indices([english, spanish])
    assert merged.languages == ("english", "spanish")
    assert len(merged.groups()) == 8
    assert len(merged.groups("spanish")) == 4

    with pytest.raises(ManifestError, match="declared twice"):
        merge_indices([english, english])

    with pytest.raises(ManifestError, match="split ages"):
        merge_indices(
            [english, DatasetIndex.from_records([], ["spanish"], split_age=30)]
        )


def test_write_manifest(tmp_path):
    path = _write(tmp_path, MANIFEST)
    index = load_manifest(path, "english")
    text = write_manifest(index, "english", data_root=tmp_path)
    assert text.splitlines()[:2] == [
        "speaker_id,utterance_id,gender,age,utterance_path",
        "spk1,a,female,39,spk1/a.wav",
    ]

    reloaded = load_manifest(_write(tmp_path, text, "out.csv"), "english")
    assert list(reloaded.records) == list(index.records)
    assert reloaded.records == index.records
