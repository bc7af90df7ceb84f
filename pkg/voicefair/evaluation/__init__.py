"""
Scoring of trial pairs, error rates, disparities, synthetic oracles and reporting.
"""
from .scoring import SCORE_COLUMNS
from .scoring import ScoreRecord
from .scoring import ScoreFile
from .scoring import cosine
from .scoring import score_trials
from .metrics import SLICES
from .metrics import MARGINAL_SLICES
from .metrics import GROUP_SLICES
from .metrics import RocPoint
from .metrics import EerResult
from .metrics import SliceMetrics
from .metrics import GroupMetrics
from .metrics import DisparityReport
from .metrics import TTestResult
from .metrics import candidate_thresholds
from .metrics import sweep_roc
from .metrics import compute_eer
from .metrics import far_at
from .metrics import frr_at
from .metrics import disparity
from .metrics import evaluate
from .metrics import paired_ttest
from .metrics import compare_folds
from .metrics import epoch_series
from .metrics import disparity_series
from .synth import ScoreParams
from .synth import GroupScoreSpec
from .synth import expected_eer
from .synth import synth_scores
from .synth import synth_embeddings
from .synth import synth_index
from .report import TABLE_COLUMNS
from .report import TableFormat
from .report import ResultRow
from .report import emit_table
from .report import parse_table
from .report import emit_series
from .report import parse_series
from .report import emit_group_counts
from .report import load_training_accuracy
from .report import mean_rows
from .report import report_filename
