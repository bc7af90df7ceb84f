"""
Command line surface: every pipeline stage as a subcommand.

::

    voicefair ingest --config run.yml
    voicefair split --config run.yml --fold 0
    voicefair trials --config run.yml --fold 0 --mode test1
    voicefair synth --config run.yml --fold 0
    voicefair score --config run.yml --fold 0 --train-recipe 1
    voicefair eval --config run.yml --fold 0 --train-recipe 1
    voicefair report --config run.yml

Artifacts are written under ``<out>/<config-hash>-seed<seed>/``, run-level stages
in their own directory (``ingest/``, ``report/``) and the others under
``fold<k>/<stage>/``. Each artifact gets a ``<artifact>.provenance.json`` sidecar.
An existing artifact is never modified: identical content is skipped, different
content is refused unless ``--force`` is given.
"""
from __future__ import annotations

__all__ = (
    "TRAINING_ONLY_KEYS",
    "SynthSettings",
    "RunConfig",
    "build_parser",
    "run_command",
    "main",
)

import argparse
import dataclasses
import hashlib
import io
import itertools
import json
import logging
import os
import sys
import types
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Union

import coloredlogs
import numpy
import yaml

import voicefair
from voicefair import cfg
from voicefair.audio import EmbeddingStore
from voicefair.audio import FeatureConfig
from voicefair.audio import FeatureKind
from voicefair.audio import FeatureMatrix
from voicefair.audio import baseline_embed
from voicefair.audio import embed_utterances
from voicefair.audio import export_embeddings
from voicefair.audio import import_embeddings
from voicefair.audio import load_wav
from voicefair.audio import logmel
from voicefair.audio import spectrogram
from voicefair.dataset import DatasetIndex
from voicefair.dataset import GroupKey
from voicefair.dataset import SplitConfig
from voicefair.dataset import TestMode
from voicefair.dataset import TestRoster
from voicefair.dataset import TrainRecipe
from voicefair.dataset import TrialFile
from voicefair.dataset import build_train_split
from voicefair.dataset import filter_min_utterances
from voicefair.dataset import fold_seed
from voicefair.dataset import gen_trials
from voicefair.dataset import group_counts
from voicefair.dataset import load_manifest
from voicefair.dataset import merge_indices
from voicefair.dataset import select_test_roster
from voicefair.dataset import validate_trials
from voicefair.dataset import write_manifest
from voicefair.errors import ConfigError
from voicefair.errors import StageDependencyError
from voicefair.errors import TrialError
from voicefair.errors import VoicefairError
from voicefair.evaluation import GroupScoreSpec
from voicefair.evaluation import ResultRow
from voicefair.evaluation import ScoreFile
from voicefair.evaluation import ScoreParams
from voicefair.evaluation import TableFormat
from voicefair.evaluation import compare_folds
from voicefair.evaluation import disparity_series
from voicefair.evaluation import emit_group_counts
from voicefair.evaluation import emit_series
from voicefair.evaluation import emit_table
from voicefair.evaluation import epoch_series
from voicefair.evaluation import evaluate
from voicefair.evaluation import load_training_accuracy
from voicefair.evaluation import mean_rows
from voicefair.evaluation import parse_table
from voicefair.evaluation import report_filename
from voicefair.evaluation import score_trials
from voicefair.evaluation import synth_embeddings
from voicefair.evaluation import synth_scores
from voicefair.utils import format_rows
from voicefair.utils import mix_seed
from voicefair.utils import sha256_text
from voicefair.utils import simplify
from voicefair.utils import write_atomic

logger = logging.getLogger(__name__)

TRAINING_ONLY_KEYS = frozenset(
    (
        "architecture",
        "epochs",
        "batch_size",
        "learning_rate",
        "optimizer",
        "loss",
        "n_seconds",
    )
)
"""
Keys of model training configurations, accepted and ignored.
"""

_KNOWN_KEYS = frozenset(
    (
        "data_root",
        "seed",
        "manifests",
        "n_folds",
        "test_users_per_group",
        "split_age",
        "min_utterances",
        "n_same",
        "n_diff",
        "delimiter",
        "features",
        "embeddings",
        "synth",
        "training_accuracy",
        "workers",
    )
)

# keys that never change the content of an artifact
_UNHASHED_KEYS = frozenset(("seed", "workers"))

_MAX_SEED = 2**64

_GROUP_LABELS = tuple(group.label for group in GroupKey.all_for_language(""))


def _positive_int(data: Mapping[str, Any], key: str, default: int) -> int:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"'{key}' must be a positive integer, got {value!r}")
    return value


def _resolve(path: Union[str, Path], base_dir: Path) -> Path:
    path = Path(path).expanduser()
    return path if path.is_absolute() else base_dir / path


def _check_seed(seed: Any) -> int:
    if seed is None:
        raise ConfigError("a seed is mandatory: set 'seed' in the config or pass --seed")
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < _MAX_SEED:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return seed


@dataclasses.dataclass(frozen=True)
class SynthSettings:
    """
    Parameters of the synthetic stage.

    Args:
        dim: dimension of synthetic embeddings
        spread: spread of every group around its speaker centroids
        spreads: per group label (``old-female``...) spread overrides
        scores: score distributions of every group
        group_scores: per group label score distribution overrides
    """

    dim: int = 64
    spread: float = 0.5
    spreads: Mapping[str, float] = dataclasses.field(
        default_factory=lambda: types.MappingProxyType({})
    )
    scores: ScoreParams = ScoreParams.from_separation(2.0)
    group_scores: Mapping[str, ScoreParams] = dataclasses.field(
        default_factory=lambda: types.MappingProxyType({})
    )

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> SynthSettings:
        unknown = set(data) - {field.name for field in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown synth key(s) {sorted(unknown)}")

        spreads = dict(data.get("spreads") or {})
        group_scores = dict(data.get("group_scores") or {})
        for label in itertools.chain(spreads, group_scores):
            if label not in _GROUP_LABELS:
                raise ConfigError(
                    f"unknown group label '{label}' in synth, expected one of "
                    f"{list(_GROUP_LABELS)}"
                )
        try:
            scores = ScoreParams(**data["scores"]) if "scores" in data else cls.scores
            group_scores = {
                label: ScoreParams(**values) for label, values in group_scores.items()
            }
        except TypeError as excp:
            raise ConfigError(f"invalid synth score parameters: {excp}") from excp

        return cls(
            dim=_positive_int(data, "dim", cls.dim),
            spread=float(data.get("spread", cls.spread)),
            spreads=types.MappingProxyType(
                {label: float(value) for label, value in spreads.items()}
            ),
            scores=scores,
            group_scores=types.MappingProxyType(group_scores),
        )

    def spread_by_label(self) -> dict[str, float]:
        return {label: self.spreads.get(label, self.spread) for label in _GROUP_LABELS}

    def score_spec(self, languages: Sequence[str]) -> GroupScoreSpec:
        spec = GroupScoreSpec.uniform(languages, self.scores)
        for language in languages:
            for group in GroupKey.all_for_language(language):
                if group.label in self.group_scores:
                    spec = spec.with_group(group, self.group_scores[group.label])
        return spec


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """
    Resolved run configuration; every path is absolute or relative to the working
    directory.
    """

    seed: int
    manifests: Mapping[str, Path]
    data_root: Path
    config_hash: str
    n_folds: int = cfg.n_folds
    test_users_per_group: int = cfg.test_users_per_group
    split_age: int = cfg.split_age
    min_utterances: int = cfg.min_utterances
    n_same: int = cfg.n_same
    n_diff: int = cfg.n_diff
    delimiter: str = cfg.delimiter
    features: FeatureConfig = FeatureConfig()
    embeddings: str = "baseline"
    synth: SynthSettings = SynthSettings()
    training_accuracy: Optional[Path] = None
    workers: int = 1

    @classmethod
    def from_yaml(
        cls,
        path: Union[str, Path],
        seed: Optional[int] = None,
        environ: Optional[Mapping[str, str]] = None,
    ) -> RunConfig:
        """
        Read a YAML run configuration.

        Args:
            path: configuration file; relative paths inside are resolved against its
                directory
            seed: overrides the ``seed`` key
            environ: environment to read the data root override from,
                ``os.environ`` if None
        """
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as excp:
            raise ConfigError(f"cannot parse {path.name}: {excp}") from excp
        if not isinstance(data, dict):
            raise ConfigError(f"{path.name} must hold a mapping of keys")
        return cls.from_mapping(data, base_dir=path.parent, seed=seed, environ=environ)

    @classmethod
    def from_mapping(
        cls,
        data: Mapping[str, Any],
        base_dir: Union[str, Path] = ".",
        seed: Optional[int] = None,
        environ: Optional[Mapping[str, str]] = None,
    ) -> RunConfig:
        base_dir = Path(base_dir)
        environ = os.environ if environ is None else environ

        for key in sorted(set(data) & TRAINING_ONLY_KEYS):
            logger.warning(f"[RunConfig] ignoring training-only key '{key}'")
        unknown = set(data) - _KNOWN_KEYS - TRAINING_ONLY_KEYS
        if unknown:
            raise ConfigError(
                f"unknown config key(s) {sorted(unknown)}, expected {sorted(_KNOWN_KEYS)}"
            )

        seed = _check_seed(data.get("seed") if seed is None else seed)

        manifests = data.get("manifests")
        if not isinstance(manifests, Mapping) or not manifests:
            raise ConfigError("'manifests' must map at least one language to a file")
        resolved = {}
        for language, manifest in manifests.items():
            manifest = _resolve(manifest, base_dir)
            if not manifest.is_file():
                raise ConfigError(f"manifest of '{language}' not found: {manifest}")
            resolved[str(language)] = manifest

        data_root = environ.get(cfg.data_root_env_var) or data.get("data_root") or "."
        data_root = _resolve(data_root, base_dir)
        if not data_root.is_dir():
            raise ConfigError(f"data root is not a directory: {data_root}")

        embeddings = str(data.get("embeddings", "baseline"))
        if embeddings.startswith("import:"):
            imported = _resolve(embeddings[len("import:") :], base_dir)
            if not imported.is_file():
                raise ConfigError(f"embedding file not found: {imported}")
            embeddings = f"import:{imported}"
        elif embeddings != "baseline":
            raise ConfigError(
                f"'embeddings' must be 'baseline' or 'import:<path>', got '{embeddings}'"
            )

        training_accuracy = data.get("training_accuracy")
        if training_accuracy is not None:
            training_accuracy = _resolve(training_accuracy, base_dir)
            if not training_accuracy.is_file():
                raise ConfigError(
                    f"training accuracy file not found: {training_accuracy}"
                )

        hashed = {
            key: value
            for key, value in data.items()
            if key not in _UNHASHED_KEYS and key not in TRAINING_ONLY_KEYS
        }
        # resolved root, environment override included
        hashed["data_root"] = str(data_root)
        config_hash = sha256_text(json.dumps(hashed, sort_keys=True, default=str))[:12]

        split_age = _positive_int(data, "split_age", cfg.split_age)
        return cls(
            seed=seed,
            manifests=types.MappingProxyType(resolved),
            data_root=data_root,
            config_hash=config_hash,
            n_folds=_positive_int(data, "n_folds", cfg.n_folds),
            test_users_per_group=_positive_int(
                data, "test_users_per_group", cfg.test_users_per_group
            ),
            split_age=split_age,
            min_utterances=_positive_int(data, "min_utterances", cfg.min_utterances),
            n_same=_positive_int(data, "n_same", cfg.n_same),
            n_diff=_positive_int(data, "n_diff", cfg.n_diff),
            delimiter=str(data.get("delimiter", cfg.delimiter)),
            features=FeatureConfig.from_mapping(data.get("features") or {}),
            embeddings=embeddings,
            synth=SynthSettings.from_mapping(data.get("synth") or {}),
            training_accuracy=training_accuracy,
            workers=_positive_int(data, "workers", 1),
        )

    @property
    def languages(self) -> tuple[str, ...]:
        return tuple(sorted(self.manifests))

    @property
    def split_config(self) -> SplitConfig:
        return SplitConfig(
            seed=self.seed,
            test_users_per_group=self.test_users_per_group,
            n_folds=self.n_folds,
            split_age=self.split_age,
        )


@dataclasses.dataclass(frozen=True)
class _RunContext:
    config: RunConfig
    out: Path
    fold: int
    force: bool

    @property
    def run_dir(self) -> Path:
        return self.out / f"{self.config.config_hash}-seed{self.config.seed}"

    def stage_dir(self, stage: str, per_fold: bool = True) -> Path:
        if per_fold:
            return self.run_dir / f"fold{self.fold}" / stage
        return self.run_dir / stage

    def write(
        self,
        stage: str,
        relative: Union[str, Path],
        content: Union[str, bytes],
        per_fold: bool = True,
    ) -> Path:
        """
        Write a stage artifact and its provenance sidecar under the stage directory.

        Raises:
            ConfigError: if the artifact exists with a different content and
                ``force`` is False.
        """
        path = self.stage_dir(stage, per_fold) / relative
        data = content.encode("utf-8") if isinstance(content, str) else content
        provenance = {
            "artifact": path.name,
            "stage": stage,
            "config_hash": self.config.config_hash,
            "seed": self.config.seed,
            "fold": self.fold if per_fold else None,
            "toolkit_version": voicefair.__version__,
            "sha256": hashlib.sha256(data).hexdigest(),
        }
        sidecar = path.with_name(f"{path.name}.provenance.json")
        _write_if_new(path, data, self.force)
        _write_if_new(
            sidecar,
            (json.dumps(provenance, indent=2, sort_keys=True) + "\n").encode("utf-8"),
            self.force,
        )
        return path


def _write_if_new(path: Path, data: bytes, force: bool):
    if path.exists():
        if path.read_bytes() == data:
            logger.debug(f"[write] {path} unchanged, skipped")
            return
        if not force:
            raise ConfigError(
                f"{path} already exists with a different content, "
                f"pass --force to overwrite it"
            )
        logger.warning(f"[write] overwriting {path}")
    write_atomic(path, data)


def _require(path: Path, stage: str) -> Path:
    if not path.is_file():
        raise StageDependencyError(
            f"missing {path}, run `voicefair {stage}` with the same config, seed and "
            f"fold first"
        )
    return path


def _selected_languages(config: RunConfig, args: argparse.Namespace) -> list[str]:
    if not getattr(args, "languages", None):
        return list(config.languages)
    languages = sorted(
        {language.strip() for token in args.languages for language in token.split(",")}
        - {""}
    )
    unknown = set(languages) - set(config.languages)
    if unknown:
        raise ConfigError(
            f"language(s) {sorted(unknown)} not in the config {list(config.languages)}"
        )
    return languages


def _selected_modes(args: argparse.Namespace) -> list[TestMode]:
    return list(getattr(args, "mode", None) or TestMode)


def _train_id(args: argparse.Namespace, languages: Sequence[str]) -> str:
    if getattr(args, "train_id", None):
        return args.train_id
    recipe = args.train_recipe[0] if args.train_recipe else TrainRecipe.user_balanced
    return f"{'-'.join(language.upper() for language in languages)} TRAIN {recipe.value}"


def _trial_path(context: _RunContext, mode: TestMode, language: str) -> Path:
    return context.stage_dir("trials") / f"{mode.label}_{language}.csv"


def _score_path(
    context: _RunContext,
    train_id: str,
    mode: TestMode,
    language: str,
    epoch: Optional[int],
) -> Path:
    suffix = "" if epoch is None else f"_epoch{epoch}"
    return (
        context.stage_dir("score")
        / simplify(train_id)
        / f"{mode.label}_{language}{suffix}.csv"
    )


def _load_index(context: _RunContext, languages: Sequence[str]) -> DatasetIndex:
    config = context.config
    indices = []
    for language in languages:
        ingested = context.stage_dir("ingest", per_fold=False) / f"{language}.csv"
        path = _require(ingested, "ingest")
        indices.append(
            load_manifest(
                path,
                language,
                data_root=config.data_root,
                delimiter=config.delimiter,
                split_age=config.split_age,
            )
        )
    return merge_indices(indices)


def _load_roster(context: _RunContext) -> TestRoster:
    path = _require(context.stage_dir("split") / "roster.csv", "split")
    return TestRoster.from_text(
        path.read_text(encoding="utf-8"), context.fold, delimiter=context.config.delimiter
    )


def _load_trials(context: _RunContext, mode: TestMode, language: str) -> TrialFile:
    path = _require(_trial_path(context, mode, language), "trials")
    config = context.config
    return TrialFile.from_text(
        path.read_text(encoding="utf-8"),
        mode=mode,
        fold_id=context.fold,
        language=language,
        n_same=config.n_same,
        n_diff=config.n_diff,
        delimiter=config.delimiter,
    )


def _roster_utterances(
    index: DatasetIndex,
    roster: TestRoster,
    languages: Sequence[str],
) -> dict[tuple[str, str], Path]:
    paths = {}
    for language in languages:
        for speaker_id in roster.ordered_speakers(language):
            for utterance in index[speaker_id].utterances:
                paths[(speaker_id, utterance.utterance_id)] = utterance.audio_path
    return paths


def _npy_bytes(array: numpy.ndarray) -> bytes:
    buffer = io.BytesIO()
    numpy.save(buffer, array, allow_pickle=False)
    return buffer.getvalue()


def _cmd_ingest(context: _RunContext, args: argparse.Namespace):
    config = context.config
    counts = {}
    for language in _selected_languages(config, args):
        index = load_manifest(
            config.manifests[language],
            language,
            data_root=config.data_root,
            delimiter=config.delimiter,
            split_age=config.split_age,
        )
        index = filter_min_utterances(index, config.min_utterances)
        counts.update(group_counts(index))
        context.write(
            "ingest",
            f"{language}.csv",
            write_manifest(index, language, config.data_root, config.delimiter),
            per_fold=False,
        )

    suffix = "-".join(sorted({group.language for group in counts}))
    for table_format in TableFormat:
        context.write(
            "ingest",
            f"group_counts_{suffix}.{table_format.extension}",
            emit_group_counts(counts, table_format, config.delimiter),
            per_fold=False,
        )


def _cmd_split(context: _RunContext, args: argparse.Namespace):
    config = context.config
    # the roster always covers every language so it does not depend on --languages
    index = _load_index(context, config.languages)
    roster = select_test_roster(index, config.split_config, context.fold)
    context.write("split", "roster.csv", roster.to_text(config.delimiter))

    languages = _selected_languages(config, args)
    train_index = DatasetIndex.from_records(
        (record for record in index.records.values() if record.language in languages),
        languages=languages,
        split_age=config.split_age,
    )
    train_roster = TestRoster(
        fold_id=roster.fold_id,
        members=types.MappingProxyType(
            {
                group: speakers
                for group, speakers in roster.members.items()
                if group.language in languages
            }
        ),
    )
    for recipe in args.train_recipe or list(TrainRecipe):
        split = build_train_split(train_index, train_roster, config.split_config, recipe)
        context.write(
            "split",
            f"train{recipe.value}_{'-'.join(languages)}.csv",
            split.to_text(config.delimiter),
        )


def _cmd_trials(context: _RunContext, args: argparse.Namespace):
    config = context.config
    roster = _load_roster(context)
    index = _load_index(context, config.languages)
    seed = fold_seed(config.seed, context.fold)
    for language in _selected_languages(config, args):
        for mode in _selected_modes(args):
            trials = gen_trials(
                roster,
                index,
                mode,
                seed,
                n_same=config.n_same,
                n_diff=config.n_diff,
                language=language,
            )
            report = validate_trials(trials, roster, index)
            if not report.is_valid:
                raise TrialError(
                    f"{trials.identifier}: {len(report)} protocol violation(s), "
                    f"first: {report.violations[0]}"
                )
            context.write(
                "trials",
                _trial_path(context, mode, language).name,
                trials.to_text(config.delimiter),
            )


def _cmd_extract(context: _RunContext, args: argparse.Namespace):
    config = context.config
    roster = _load_roster(context)
    index = _load_index(context, config.languages)
    paths = _roster_utterances(index, roster, _selected_languages(config, args))

    def extract(path: Path) -> tuple[numpy.ndarray, numpy.ndarray]:
        wave = load_wav(path, sample_rate=config.features.sample_rate)
        return (
            logmel(wave, config.features).data,
            spectrogram(wave, config.features).data,
        )

    workers = args.workers or config.workers
    with ThreadPoolExecutor(workers) as executor:
        results = list(executor.map(extract, paths.values()))

    for (speaker_id, utterance_id), (logmel_data, spectrogram_data) in zip(paths, results):
        for kind, data in (
            (FeatureKind.logmel, logmel_data),
            (FeatureKind.spectrogram, spectrogram_data),
        ):
            context.write(
                "extract",
                Path(speaker_id) / f"{utterance_id}.{kind.value}.npy",
                _npy_bytes(data),
            )
    logger.info(f"[extract] features of {len(paths)} utterances")


def _cmd_embed(context: _RunContext, args: argparse.Namespace):
    config = context.config
    source = f"import:{args.embeddings}" if args.embeddings else config.embeddings

    if source.startswith("import:"):
        store = import_embeddings(source[len("import:") :], delimiter=config.delimiter)
    else:
        roster = _load_roster(context)
        index = _load_index(context, config.languages)
        paths = _roster_utterances(index, roster, _selected_languages(config, args))

        extracted = {}
        to_embed = {}
        for key, audio_path in paths.items():
            features = context.stage_dir("extract") / key[0] / f"{key[1]}.logmel.npy"
            if features.is_file():
                extracted[key] = baseline_embed(
                    FeatureMatrix(numpy.load(features), FeatureKind.logmel)
                )
            else:
                to_embed[key] = audio_path
        computed = EmbeddingStore.from_entries({})
        if to_embed:
            computed = embed_utterances(
                to_embed, config.features, workers=args.workers or config.workers
            )
        store = EmbeddingStore.from_entries(
            (key, extracted[key] if key in extracted else computed[key]) for key in paths
        )

    context.write(
        "embed", "embeddings.csv", export_embeddings(store, delimiter=config.delimiter)
    )


def _cmd_score(context: _RunContext, args: argparse.Namespace):
    config = context.config
    languages = _selected_languages(config, args)
    train_id = _train_id(args, languages)
    if args.embeddings:
        embeddings_path = Path(args.embeddings)
        if not embeddings_path.is_file():
            raise ConfigError(f"embedding file not found: {embeddings_path}")
    else:
        embeddings_path = _require(context.stage_dir("embed") / "embeddings.csv", "embed")
    store = import_embeddings(embeddings_path, delimiter=config.delimiter)

    for language in languages:
        for mode in _selected_modes(args):
            trials = _load_trials(context, mode, language)
            scores = score_trials(
                trials,
                store,
                train_id=train_id,
                embedding_source=embeddings_path.name,
                epoch=args.epoch,
            )
            path = _score_path(context, train_id, mode, language, args.epoch)
            context.write(
                "score",
                path.relative_to(context.stage_dir("score")),
                scores.to_text(config.delimiter),
            )


def _read_scores(
    context: _RunContext,
    path: Path,
    train_id: str,
    trial_id: str,
) -> ScoreFile:
    return ScoreFile.from_text(
        path.read_text(encoding="utf-8"),
        train_id=train_id,
        trial_id=trial_id,
        embedding_source=path.name,
        delimiter=context.config.delimiter,
    )


def _cmd_eval(context: _RunContext, args: argparse.Namespace):
    config = context.config
    languages = _selected_languages(config, args)
    train_id = _train_id(args, languages)
    accuracies = (
        load_training_accuracy(config.training_accuracy, config.delimiter)
        if config.training_accuracy
        else {}
    )
    train_slug = simplify(train_id)
    suffix = "" if args.epoch is None else f"_epoch{args.epoch}"

    rows = []
    for language in languages:
        for mode in _selected_modes(args):
            test_id = f"{language.upper()} TEST {mode.number}"
            path = _require(
                _score_path(context, train_id, mode, language, args.epoch), "score"
            )
            metrics, disparities = evaluate(_read_scores(context, path, train_id, test_id))
            rows.append(
                ResultRow.from_metrics(
                    train_id, test_id, metrics, disparities, accuracies.get(train_id)
                )
            )
            document = {
                "train_id": train_id,
                "test_id": test_id,
                "fold": context.fold,
                "epoch": args.epoch,
                "metrics": metrics.to_dict(),
                "disparity": disparities.to_dict(),
            }
            context.write(
                "eval",
                Path(train_slug) / f"{mode.label}_{language}{suffix}.json",
                json.dumps(document, indent=2, sort_keys=True) + "\n",
            )

    context.write(
        "eval",
        Path(train_slug) / f"rows{suffix}.csv",
        emit_table(rows, TableFormat.csv, config.delimiter),
    )


def _cmd_series(context: _RunContext, args: argparse.Namespace):
    config = context.config
    languages = _selected_languages(config, args)
    train_id = _train_id(args, languages)
    score_dir = context.stage_dir("score") / simplify(train_id)

    for language in languages:
        for mode in _selected_modes(args):
            paths = sorted(score_dir.glob(f"{mode.label}_{language}_epoch*.csv"))
            if not paths:
                raise StageDependencyError(
                    f"no epoch-tagged score file in {score_dir} for {mode.label} "
                    f"{language}, run `voicefair score --epoch <n>` first"
                )
            test_id = f"{language.upper()} TEST {mode.number}"
            series = epoch_series(
                [_read_scores(context, path, train_id, test_id) for path in paths]
            )
            for name, values in disparity_series(series).items():
                logger.info(
                    f"[series] {test_id} {name}: "
                    + ", ".join(
                        f"{epoch}={100 * value:.2f}" for epoch, value in values.items()
                    )
                )
            context.write(
                "series",
                Path(simplify(train_id)) / f"{mode.label}_{language}.csv",
                emit_series(series, config.delimiter),
            )


def _cmd_synth(context: _RunContext, args: argparse.Namespace):
    config = context.config
    settings = config.synth
    languages = _selected_languages(config, args)

    if args.kind == "embeddings":
        roster = _load_roster(context)
        index = _load_index(context, config.languages)
        store = synth_embeddings(
            roster,
            dim=settings.dim,
            spread=settings.spread_by_label(),
            seed=mix_seed(config.seed, "synth-embeddings", context.fold),
            index=index,
        )
        context.write(
            "embed", "embeddings.csv", export_embeddings(store, delimiter=config.delimiter)
        )
        return

    train_id = _train_id(args, languages)
    for language in languages:
        for mode in _selected_modes(args):
            seed = mix_seed(
                config.seed,
                "synth-scores",
                context.fold,
                mode.value,
                language,
                "untagged" if args.epoch is None else args.epoch,
            )
            scores = synth_scores(settings.score_spec([language]), seed)
            if args.epoch is not None:
                scores = scores.with_epoch(args.epoch)
            path = _score_path(context, train_id, mode, language, args.epoch)
            context.write(
                "score",
                path.relative_to(context.stage_dir("score")),
                scores.to_text(config.delimiter),
            )


def _fold_rows(
    context: _RunContext,
    train_filter: Optional[str],
) -> dict[int, list[ResultRow]]:
    rows: dict[int, list[ResultRow]] = {}
    for fold in range(context.config.n_folds):
        eval_dir = context.run_dir / f"fold{fold}" / "eval"
        for path in sorted(eval_dir.glob("*/rows.csv")):
            if train_filter is not None and path.parent.name != simplify(train_filter):
                continue
            rows.setdefault(fold, []).extend(
                parse_table(
                    path.read_text(encoding="utf-8"),
                    TableFormat.csv,
                    context.config.delimiter,
                )
            )
    return rows


def _cmd_report(context: _RunContext, args: argparse.Namespace):
    config = context.config
    rows_by_fold = _fold_rows(context, args.train_id)
    if not rows_by_fold:
        raise StageDependencyError(
            f"no evaluation rows under {context.run_dir}, run `voicefair eval` first"
        )

    per_files: dict[tuple[str, str], dict[int, ResultRow]] = {}
    for fold, rows in sorted(rows_by_fold.items()):
        for row in rows:
            per_files.setdefault((row.test_file_id, row.train_file_id), {})[fold] = row
            for table_format in TableFormat:
                context.write(
                    "report",
                    report_filename(
                        row.train_file_id, row.test_file_id, fold, table_format
                    ),
                    emit_table([row], table_format, config.delimiter),
                    per_fold=False,
                )

    means = [mean_rows(list(folds.values())) for _, folds in sorted(per_files.items())]
    for table_format in TableFormat:
        context.write(
            "report",
            f"summary.{table_format.extension}",
            emit_table(means, table_format, config.delimiter),
            per_fold=False,
        )

    significance = []
    tests = sorted({test_id for test_id, _ in per_files})
    for test_id in tests:
        trains = sorted(train_id for test, train_id in per_files if test == test_id)
        for first, second in itertools.combinations(trains, 2):
            folds_a = per_files[(test_id, first)]
            folds_b = per_files[(test_id, second)]
            common = sorted(set(folds_a) & set(folds_b))
            if len(common) < 2:
                continue
            for metric in ("ds_young_old", "ds_male_female"):
                result = compare_folds(
                    {fold: getattr(folds_a[fold], metric) for fold in common},
                    {fold: getattr(folds_b[fold], metric) for fold in common},
                )
                significance.append(
                    (
                        test_id,
                        first,
                        second,
                        metric,
                        len(common),
                        f"{result.t_statistic:.4f}",
                        result.degrees_of_freedom,
                        f"{result.p_value:.4f}",
                        int(result.significant_at_05),
                    )
                )
    if significance:
        header = (
            "test_file_id",
            "train_file_a",
            "train_file_b",
            "metric",
            "folds",
            "t_statistic",
            "degrees_of_freedom",
            "p_value",
            "significant_at_05",
        )
        context.write(
            "report",
            "significance.csv",
            format_rows(header, significance, config.delimiter),
            per_fold=False,
        )


_COMMANDS = {
    "ingest": _cmd_ingest,
    "split": _cmd_split,
    "trials": _cmd_trials,
    "extract": _cmd_extract,
    "embed": _cmd_embed,
    "score": _cmd_score,
    "eval": _cmd_eval,
    "series": _cmd_series,
    "synth": _cmd_synth,
    "report": _cmd_report,
}


def _train_recipe(token: str) -> TrainRecipe:
    try:
        return TrainRecipe(int(token))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"invalid train recipe '{token}', expected 1, 2 or 3"
        )


def _test_mode(token: str) -> TestMode:
    try:
        return TestMode.from_label(token)
    except TrialError as excp:
        raise argparse.ArgumentTypeError(str(excp))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    common.add_argument("--seed", type=int, help="master seed, overrides the config")
    common.add_argument("--fold", type=int, default=0, help="fold index, default 0")
    common.add_argument(
        "--out", type=Path, default=Path("voicefair-runs"), help="output root directory"
    )
    common.add_argument(
        "--languages", nargs="+", help="languages to process, default every configured one"
    )
    common.add_argument(
        "--force", action="store_true", help="overwrite artifacts with a different content"
    )
    common.add_argument("--workers", type=int, help="threads for audio stages")
    common.add_argument(
        "--log-level",
        default="INFO",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
    )

    selection = argparse.ArgumentParser(add_help=False)
    selection.add_argument(
        "--mode", nargs="+", type=_test_mode, help="test modes: test1 test2 test3"
    )
    selection.add_argument(
        "--train-recipe",
        nargs="+",
        type=_train_recipe,
        help="training recipes: 1 user balanced, 2 unbalanced, 3 utterance balanced",
    )
    selection.add_argument("--train-id", help="training file identifier of the scores")
    selection.add_argument("--epoch", type=int, help="epoch tag of the scores")

    parser = argparse.ArgumentParser(
        prog="voicefair",
        description="Fairness benchmarking toolkit for speaker verification.",
    )
    parser.add_argument("--version", action="version", version=voicefair.__version__)
    subparsers = parser.add_subparsers(dest="command", required=True)

    helps = {
        "ingest": "load and filter the manifests",
        "split": "select the test roster and build training splits",
        "trials": "generate trial files",
        "extract": "compute log-mel and spectrogram features of test utterances",
        "embed": "embed test utterances or import external embeddings",
        "score": "cosine-score trial files",
        "eval": "compute EER, FAR, FRR and disparity scores",
        "series": "EER per epoch from epoch-tagged score files",
        "synth": "generate synthetic embeddings or scores",
        "report": "emit result tables over every fold",
    }
    for name, help_text in helps.items():
        subparser = subparsers.add_parser(
            name, parents=[common, selection], help=help_text
        )
        if name in ("embed", "score"):
            subparser.add_argument("--embeddings", help="embedding file to use")
        if name == "synth":
            subparser.add_argument(
                "--kind", choices=("embeddings", "scores"), default="embeddings"
            )
    return parser


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on a toolkit error, 2 on invalid arguments
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as excp:
        return int(excp.code or 0)

    coloredlogs.install(
        level=args.log_level,
        fmt="%(asctime)s %(levelname)s %(name)s %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    try:
        config = RunConfig.from_yaml(args.config, seed=args.seed)
        if not 0 <= args.fold < config.n_folds:
            raise ConfigError(f"--fold {args.fold} outside [0, {config.n_folds})")
        if args.workers is not None and args.workers < 1:
            raise ConfigError(f"--workers must be positive, got {args.workers}")
        context = _RunContext(
            config=config, out=args.out, fold=args.fold, force=args.force
        )
        logger.info(
            f"[run_command] {args.command} fold {args.fold} -> {context.run_dir}"
        )
        _COMMANDS[args.command](context, args)
    except VoicefairError as excp:
        logger.error(str(excp))
        return 1
    return 0


def main():
    sys.exit(run_command(sys.argv[1:]))
