from __future__ import annotations

__all__ = (
    "EmbeddingSource",
    "Embedding",
    "EmbeddingStore",
    "baseline_embed",
    "embed_utterance",
    "embed_utterances",
    "import_embeddings",
    "export_embeddings",
    "parse_embeddings",
)

import csv
import dataclasses
import enum
import functools
import io
import logging
import types
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable
from typing import Mapping
from typing import Sequence
from typing import Union

import numpy

from voicefair import cfg
from voicefair.errors import AcousticError
from voicefair.utils import format_rows
from ._features import FeatureConfig
from ._features import FeatureKind
from ._features import FeatureMatrix
from ._features import logmel
from ._wave import load_wav

logger = logging.getLogger(__name__)

UtteranceKey = tuple[str, str]


class EmbeddingSource(enum.Enum):
    baseline = "baseline"
    external = "external"
    synthetic = "synthetic"


@dataclasses.dataclass(frozen=True, eq=False)
class Embedding:
    vector: numpy.ndarray
    source: EmbeddingSource = EmbeddingSource.external

    def __post_init__(self):
        if self.vector.ndim != 1 or not self.vector.size:
            raise AcousticError(
                f"embedding must be a non-empty 1D vector, got shape {self.vector.shape}"
            )
        if not numpy.all(numpy.isfinite(self.vector)):
            raise AcousticError("embedding holds non-finite values")

    @property
    def dim(self) -> int:
        return self.vector.size


@dataclasses.dataclass(frozen=True, eq=False)
class EmbeddingStore:
    """
    Read-only mapping of (speaker_id, utterance_id) to embeddings of a single dimension.
    """

    entries: Mapping[UtteranceKey, Embedding]

    @classmethod
    def from_entries(
        cls,
        entries: Union[
            Mapping[UtteranceKey, Embedding], Iterable[tuple[UtteranceKey, Embedding]]
        ],
    ) -> EmbeddingStore:
        """
        Raises:
            AcousticError: on duplicated keys or mixed dimensions.
        """
        items = entries.items() if isinstance(entries, Mapping) else entries
        mapping: dict[UtteranceKey, Embedding] = {}
        dim = None
        for key, embedding in items:
            key = (str(key[0]), str(key[1]))
            if key in mapping:
                raise AcousticError(f"duplicate embedding for {key}")
            if dim is None:
                dim = embedding.dim
            elif embedding.dim != dim:
                raise AcousticError(
                    f"embedding {key} has dim {embedding.dim}, store dim is {dim}"
                )
            mapping[key] = embedding
        return cls(entries=types.MappingProxyType(mapping))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: UtteranceKey) -> bool:
        return tuple(key) in self.entries

    def __getitem__(self, key: UtteranceKey) -> Embedding:
        return self.entries[tuple(key)]

    def keys(self) -> tuple[UtteranceKey, ...]:
        return tuple(self.entries)

    @functools.cached_property
    def dim(self) -> int:
        """
        Dimension shared by every embedding, 0 for an empty store.
        """
        for embedding in self.entries.values():
            return embedding.dim
        return 0

    def missing(self, keys: Iterable[UtteranceKey]) -> list[UtteranceKey]:
        return [tuple(key) for key in keys if tuple(key) not in self.entries]

    def matrix(self, keys: Sequence[UtteranceKey]) -> numpy.ndarray:
        """
        Stack the embeddings of the given keys as rows of a 2D array.

        Raises:
            KeyError: if a key is absent.
        """
        if not keys:
            return numpy.zeros((0, self.dim))
        return numpy.stack([self.entries[tuple(key)].vector for key in keys])


def baseline_embed(features: FeatureMatrix) -> Embedding:
    """
    Fixed utterance embedding from log-mel features.

    The global mean of the matrix is removed, then the per-band mean and the per-band
    standard deviation over frames are concatenated, giving ``2 * n_mels`` values.

    Raises:
        AcousticError: for non log-mel features or fewer than 2 frames.
    """
    if features.kind is not FeatureKind.logmel:
        raise AcousticError(
            f"baseline embedding expects logmel features, got {features.kind.value}"
        )
    if features.n_frames < 2:
        raise AcousticError(
            f"baseline embedding needs at least 2 frames, got {features.n_frames}"
        )

    data = features.data - features.data.mean()
    vector = numpy.concatenate((data.mean(axis=0), data.std(axis=0)))
    return Embedding(vector=vector, source=EmbeddingSource.baseline)


def embed_utterance(
    path: Union[str, Path],
    feature_config: FeatureConfig = FeatureConfig(),
) -> Embedding:
    """
    Decode, compute log-mel features and embed a single audio file.
    """
    wave = load_wav(path, sample_rate=feature_config.sample_rate)
    return baseline_embed(logmel(wave, feature_config))


def embed_utterances(
    paths: Mapping[UtteranceKey, Union[str, Path]],
    feature_config: FeatureConfig = FeatureConfig(),
    workers: int = 1,
) -> EmbeddingStore:
    """
    Baseline-embed every given utterance.

    Args:
        paths: (speaker_id, utterance_id) to audio file
        feature_config: front-end parameters
        workers: number of threads; 1 embeds sequentially

    Returns:
        store keyed and ordered like ``paths``
    """
    if workers < 1:
        raise AcousticError(f"workers must be a positive integer, got {workers}")

    keys = list(paths)
    embed = functools.partial(embed_utterance, feature_config=feature_config)

    if workers == 1:
        embeddings = [embed(paths[key]) for key in keys]
    else:
        with ThreadPoolExecutor(workers) as executor:
            embeddings = list(executor.map(embed, [paths[key] for key in keys]))

    logger.info(
        f"[embed_utterances] embedded {len(keys)} utterances with {workers} worker(s)"
    )
    return EmbeddingStore.from_entries(zip(keys, embeddings))


def parse_embeddings(
    text: str,
    delimiter: str = cfg.delimiter,
    source: str = "<embeddings>",
    origin: EmbeddingSource = EmbeddingSource.external,
) -> EmbeddingStore:
    """
    Parse the content of an embedding file, see :func:`import_embeddings`.
    """
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    header = next(reader, None)
    if header is None:
        raise AcousticError(f"{source}: empty embedding file")
    header = [name.strip() for name in header]
    dim = len(header) - 2
    expected = ["speaker_id", "utterance_id"] + [f"e{position}" for position in range(dim)]
    if dim < 1 or header != expected:
        raise AcousticError(
            f"{source}: header must be 'speaker_id,utterance_id,e0,...,e<d-1>', "
            f"got '{delimiter.join(header)}'"
        )

    entries: list[tuple[UtteranceKey, Embedding]] = []
    seen: set[UtteranceKey] = set()
    for row in reader:
        if not any(value.strip() for value in row):
            continue
        line_number = reader.line_num
        if len(row) - 2 != dim:
            raise AcousticError(
                f"{source}: row {line_number} has {len(row) - 2} values, expected {dim}"
            )
        key = (row[0].strip(), row[1].strip())
        if key in seen:
            raise AcousticError(f"{source}: row {line_number}: duplicate key {key}")
        seen.add(key)
        try:
            vector = numpy.array([float(value) for value in row[2:]], dtype=numpy.float64)
        except ValueError as excp:
            raise AcousticError(f"{source}: row {line_number}: {excp}") from excp
        if not numpy.all(numpy.isfinite(vector)):
            raise AcousticError(f"{source}: row {line_number}: non-finite value for {key}")
        entries.append((key, Embedding(vector=vector, source=origin)))

    return EmbeddingStore.from_entries(entries)


def import_embeddings(
    path: Union[str, Path],
    delimiter: str = cfg.delimiter,
) -> EmbeddingStore:
    """
    Load embeddings produced outside the toolkit.

    The file has a header row ``speaker_id,utterance_id,e0,...,e<d-1>`` and one row
    per utterance.

    Raises:
        AcousticError: missing file, malformed header, inconsistent dimensions,
            duplicated keys or non-finite values.
    """
    path = Path(path)
    if not path.is_file():
        raise AcousticError(f"embedding file not found: {path}")
    store = parse_embeddings(
        path.read_text(encoding="utf-8"), delimiter=delimiter, source=path.name
    )
    logger.info(
        f"[import_embeddings] {path.name}: {len(store)} embeddings of dim {store.dim}"
    )
    return store


def export_embeddings(
    store: EmbeddingStore,
    delimiter: str = cfg.delimiter,
    decimals: int = cfg.embedding_decimals,
) -> str:
    """
    Serialize a store in the layout read by :func:`import_embeddings`.
    """
    header = ["speaker_id", "utterance_id"] + [
        f"e{position}" for position in range(store.dim)
    ]
    rows = [
        [speaker_id, utterance_id]
        + [f"{value:.{decimals}f}" for value in embedding.vector]
        for (speaker_id, utterance_id), embedding in store.entries.items()
    ]
    return format_rows(header, rows, delimiter=delimiter)
