"""
Config file.
Variable can be modified during runtime.
"""

delimiter = ","
"""
Column delimiter used when reading and writing every delimiter-separated artifact.
"""

min_utterances = 5
"""
Speakers with fewer utterances are dropped at ingestion, so that enough genuine trial
pairs can be built for each of them.
"""

split_age = 40
"""
Speakers strictly younger are "young", everyone else is "old".
"""

test_users_per_group = 25
n_folds = 3

n_same = 64
"""
Genuine pairs generated per test speaker.
"""

n_diff = 64
"""
Impostor pairs generated per test speaker.
"""

target_sample_rate = 16000
"""
Every waveform is brought to this rate after decoding.
"""

similarity_decimals = 6
percent_decimals = 2
embedding_decimals = 8

data_root_env_var = "VOICEFAIR_DATA_ROOT"
"""
Name of the environment variable overriding the ``data_root`` of a run configuration.
"""
