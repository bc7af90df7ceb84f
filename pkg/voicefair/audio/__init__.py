"""
Audio decoding, acoustic front-ends and utterance embeddings.
"""
from ._wave import SUPPORTED_SUBTYPES
from ._wave import Waveform
from ._wave import load_wav
from ._wave import resample
from ._features import WindowFunction
from ._features import FeatureKind
from ._features import FeatureConfig
from ._features import FeatureMatrix
from ._features import frame_count
from ._features import hz_to_mel
from ._features import mel_to_hz
from ._features import mel_filterbank
from ._features import mel_center_frequencies
from ._features import spectrogram
from ._features import logmel
from ._embeddings import EmbeddingSource
from ._embeddings import Embedding
from ._embeddings import EmbeddingStore
from ._embeddings import baseline_embed
from ._embeddings import embed_utterance
from ._embeddings import embed_utterances
from ._embeddings import import_embeddings
from ._embeddings import export_embeddings
from ._embeddings import parse_embeddings
