import time

import voicefair
from voicefair.dataset import GroupKey
from voicefair.evaluation import GroupScoreSpec
from voicefair.evaluation import ScoreParams

# 4 groups of 25 test speakers with 64 genuine and 64 impostor pairs each, 10 times over
SPEC = GroupScoreSpec.uniform(["english"], ScoreParams.from_separation(2.0, n=16000))
SPEC = SPEC.with_group(
    GroupKey.all_for_language("english")[3], ScoreParams.from_separation(1.0, n=16000)
)


def profiling_1():
    scores = voicefair.synth_scores(SPEC, seed=1)
    result = voicefair.compute_eer(scores)


def profiling_2():
    scores = voicefair.synth_scores(SPEC, seed=1)
    result = voicefair.evaluate(scores)


if __name__ == "__main__":
    time.sleep(0.25)
    profiling_1()
    time.sleep(0.25)
    profiling_2()
