"""
Speakers, demographic groups, test rosters, training splits and trial files.
"""
from .base import Gender
from .base import AgeBucket
from .base import GroupKey
from .base import UtteranceRef
from .base import SpeakerRecord
from .base import DatasetIndex
from .base import assign_group
from .manifest import load_manifest
from .manifest import filter_min_utterances
from .manifest import group_counts
from .manifest import merge_indices
from .manifest import write_manifest
from .splits import SplitConfig
from .splits import TestRoster
from .splits import TrainRecipe
from .splits import TrainItem
from .splits import TrainSplit
from .splits import fold_seed
from .splits import select_test_roster
from .splits import build_train_user_balanced
from .splits import build_train_unbalanced
from .splits import build_train_utterance_balanced
from .splits import build_train_split
from .splits import merge_language_splits
from .trials import TestMode
from .trials import TrialPair
from .trials import TrialFile
from .trials import ViolationKind
from .trials import Violation
from .trials import ValidationReport
from .trials import gen_trials
from .trials import validate_trials
