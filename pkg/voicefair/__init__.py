__version__ = "0.1.0"

from . import cfg
from . import utils
from .errors import VoicefairError
from .dataset import GroupKey
from .dataset import DatasetIndex
from .dataset import TestRoster
from .dataset import TestMode
from .dataset import TrainRecipe
from .dataset import load_manifest
from .dataset import select_test_roster
from .dataset import build_train_split
from .dataset import gen_trials
from .dataset import validate_trials
from .audio import load_wav
from .audio import logmel
from .audio import spectrogram
from .audio import EmbeddingStore
from .audio import import_embeddings
from .evaluation import ScoreFile
from .evaluation import score_trials
from .evaluation import compute_eer
from .evaluation import evaluate
from .evaluation import paired_ttest
from .evaluation import synth_scores
from .evaluation import synth_embeddings
from .evaluation import emit_table
