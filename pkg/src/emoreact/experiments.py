"""Config-driven experiment runs: source loading, feature/train/eval
pipeline, per-source emotion distributions, and the exhaustive
page-combination search."""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import classifier, corpus, embeddings as emb, features
from .classifier import LinearModel, TrainConfig
from .corpus import EMOTIONS, Emotion, LabeledDoc
from .errors import ConfigError, DataError, EmoreactError, StageError
from .evaluation import EvalReport, evaluate, render_report
from .features import FeatureConfig, Lexicon, Vectorizer

log = logging.getLogger(__name__)

SOURCE_KINDS = ("reaction_feed", "canonical_tsv", "synthetic-spec")

# Page combinations behind the shipped model presets.  The feeds
# themselves cannot be redistributed, so a preset only names the sources;
# the caller maps each name to a feed file.
PRESETS: dict[str, tuple[str, ...]] = {
    "b-m": ("Time", "TheGuardian", "Disney"),
    "ft-m": ("HuffPostWeirdNews", "ESPN", "CNN"),
    "ise-m": ("Time", "TheGuardian", "CookingLight"),
}

CONFIG_VERSION = 1
MAX_SEARCH_CANDIDATES = 15


def _reject_unknown(data: Mapping, allowed: set[str], where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


@dataclass(frozen=True)
class SourceSpec:
    """One training source: a feed file, a canonical TSV, or an inline
    synthetic-corpus specification."""

    name: str
    kind: str
    path: str | None = None
    n_docs: int = 400
    vocab_per_class: int = 25
    noise_rate: float = 0.0
    tokens_per_doc: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ConfigError(f"source {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "synthetic-spec":
            if self.path is not None:
                raise ConfigError(f"source {self.name!r}: synthetic-spec takes no path")
        elif self.path is None:
            raise ConfigError(f"source {self.name!r}: kind {self.kind!r} requires a path")

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: Path | None = None) -> "SourceSpec":
        file_keys = {"name", "kind", "path"}
        synth_keys = {"name", "kind", "n_docs", "vocab_per_class", "noise_rate", "tokens_per_doc", "seed"}
        kind = data.get("kind")
        allowed = synth_keys if kind == "synthetic-spec" else file_keys
        _reject_unknown(data, allowed, "source")
        kwargs = dict(data)
        if kwargs.get("path") is not None:
            kwargs["path"] = str(_resolve(kwargs["path"], base_dir))
        return cls(**kwargs)

    def to_dict(self) -> dict:
        if self.kind == "synthetic-spec":
            return {
                "name": self.name,
                "kind": self.kind,
                "n_docs": self.n_docs,
                "vocab_per_class": self.vocab_per_class,
                "noise_rate": self.noise_rate,
                "tokens_per_doc": self.tokens_per_doc,
                "seed": self.seed,
            }
        return {"name": self.name, "kind": self.kind, "path": self.path}


@dataclass(frozen=True)
class DatasetSpec:
    """A held-out evaluation dataset in canonical TSV form."""

    name: str
    path: str

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: Path | None = None) -> "DatasetSpec":
        _reject_unknown(data, {"name", "path"}, "dataset")
        return cls(name=data["name"], path=str(_resolve(data["path"], base_dir)))

    def to_dict(self) -> dict:
        return {"name": self.name, "path": self.path}


@dataclass(frozen=True)
class RetrofitSettings:
    lexicon: str
    iterations: int = 10
    max_degree: int = 50

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: Path | None = None) -> "RetrofitSettings":
        _reject_unknown(data, {"lexicon", "iterations", "max_degree"}, "retrofit")
        kwargs = dict(data)
        kwargs["lexicon"] = str(_resolve(kwargs["lexicon"], base_dir))
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {"lexicon": self.lexicon, "iterations": self.iterations, "max_degree": self.max_degree}


@dataclass(frozen=True)
class EmbeddingSettings:
    """Where the embedding table comes from: nowhere, a vector file, or a
    skip-gram run over the training corpus; optionally retrofitted."""

    mode: str = "none"
    path: str | None = None
    window: int = 5
    lr: float = 0.01
    dim: int = 100
    min_count: int = 2
    negatives: int = 5
    epochs: int = 5
    seed: int = 0
    retrofit: RetrofitSettings | None = None

    def __post_init__(self):
        if self.mode not in ("none", "load", "train"):
            raise ConfigError(f"unknown embeddings mode {self.mode!r}")
        if self.mode == "load" and self.path is None:
            raise ConfigError("embeddings mode 'load' requires a path")
        if self.mode == "none" and self.retrofit is not None:
            raise ConfigError("cannot retrofit without an embedding table")

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: Path | None = None) -> "EmbeddingSettings":
        allowed = {"mode", "path", "window", "lr", "dim", "min_count", "negatives", "epochs", "seed", "retrofit"}
        _reject_unknown(data, allowed, "embeddings")
        kwargs = dict(data)
        if kwargs.get("path") is not None:
            kwargs["path"] = str(_resolve(kwargs["path"], base_dir))
        if kwargs.get("retrofit") is not None:
            kwargs["retrofit"] = RetrofitSettings.from_dict(kwargs["retrofit"], base_dir)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        d = {
            "mode": self.mode,
            "path": self.path,
            "window": self.window,
            "lr": self.lr,
            "dim": self.dim,
            "min_count": self.min_count,
            "negatives": self.negatives,
            "epochs": self.epochs,
            "seed": self.seed,
            "retrofit": self.retrofit.to_dict() if self.retrofit else None,
        }
        return d


def _resolve(path: str, base_dir: Path | None) -> Path:
    p = Path(path)
    if base_dir is not None and not p.is_absolute():
        p = base_dir / p
    return p


def _default_features(embedding_mode: str) -> FeatureConfig:
    """The default feature preset: every automatically derived family (the
    lexicon stays off), plus the embedding block when a table is
    configured."""
    return FeatureConfig(
        tfidf=True,
        word_ngrams=True,
        char_ngrams=True,
        negation=True,
        punctuation=True,
        lexicon=False,
        embeddings=embedding_mode != "none",
    )


@dataclass(frozen=True)
class ExperimentConfig:
    sources: tuple[SourceSpec, ...]
    datasets: tuple[DatasetSpec, ...]
    features: FeatureConfig
    train: TrainConfig
    embeddings: EmbeddingSettings
    output_dir: str
    lexicon: str | None = None
    max_entropy: float | None = None

    def __post_init__(self):
        if not self.sources:
            raise ConfigError("at least one training source is required")
        if not self.datasets:
            raise ConfigError("at least one evaluation dataset is required")
        names = [s.name for s in self.sources]
        if len(set(names)) != len(names):
            raise ConfigError("source names must be unique")
        ds_names = [d.name for d in self.datasets]
        if len(set(ds_names)) != len(ds_names):
            raise ConfigError("dataset names must be unique")
        if self.features.lexicon and self.lexicon is None:
            raise ConfigError("features.lexicon is enabled but no lexicon path is set")
        if self.features.embeddings and self.embeddings.mode == "none":
            raise ConfigError("features.embeddings is enabled but embeddings.mode is 'none'")
        if not self.features.embeddings and self.embeddings.mode != "none":
            raise ConfigError("embeddings are configured but features.embeddings is disabled")
        if self.max_entropy is not None and self.max_entropy < 0:
            raise ConfigError("max_entropy must be >= 0")

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: Path | None = None, check_paths: bool = True) -> "ExperimentConfig":
        allowed = {
            "version", "sources", "datasets", "features", "train",
            "embeddings", "lexicon", "max_entropy", "output_dir",
        }
        _reject_unknown(data, allowed, "config")
        version = data.get("version")
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version!r} (expected {CONFIG_VERSION})")
        if "output_dir" not in data:
            raise ConfigError("config requires an output_dir")
        try:
            sources = tuple(SourceSpec.from_dict(s, base_dir) for s in data.get("sources", ()))
            datasets = tuple(DatasetSpec.from_dict(d, base_dir) for d in data.get("datasets", ()))
            emb_settings = EmbeddingSettings.from_dict(data["embeddings"], base_dir) if "embeddings" in data else EmbeddingSettings()
            feats = (
                FeatureConfig.from_dict(data["features"])
                if "features" in data
                else _default_features(emb_settings.mode)
            )
            train_cfg = TrainConfig.from_dict(data["train"]) if "train" in data else TrainConfig()
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e
        lexicon = data.get("lexicon")
        if lexicon is not None:
            lexicon = str(_resolve(lexicon, base_dir))
        config = cls(
            sources=sources,
            datasets=datasets,
            features=feats,
            train=train_cfg,
            embeddings=emb_settings,
            output_dir=str(_resolve(data["output_dir"], base_dir)),
            lexicon=lexicon,
            max_entropy=data.get("max_entropy"),
        )
        if check_paths:
            config.check_paths()
        return config

    @classmethod
    def from_json(cls, path: str | Path, check_paths: bool = True) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data, base_dir=path.parent, check_paths=check_paths)

    def check_paths(self) -> None:
        """Fail early if any referenced input file is missing."""
        missing = []
        for spec in self.sources:
            if spec.path is not None and not Path(spec.path).is_file():
                missing.append(spec.path)
        for ds in self.datasets:
            if not Path(ds.path).is_file():
                missing.append(ds.path)
        if self.embeddings.mode == "load" and not Path(self.embeddings.path).is_file():
            missing.append(self.embeddings.path)
        if self.embeddings.retrofit and not Path(self.embeddings.retrofit.lexicon).is_file():
            missing.append(self.embeddings.retrofit.lexicon)
        if self.lexicon is not None and not Path(self.lexicon).is_file():
            missing.append(self.lexicon)
        if missing:
            raise ConfigError("missing input files: " + ", ".join(sorted(set(missing))))

    def to_dict(self) -> dict:
        return {
            "version": CONFIG_VERSION,
            "sources": [s.to_dict() for s in self.sources],
            "datasets": [d.to_dict() for d in self.datasets],
            "features": self.features.to_dict(),
            "train": self.train.to_dict(),
            "embeddings": self.embeddings.to_dict(),
            "lexicon": self.lexicon,
            "max_entropy": self.max_entropy,
            "output_dir": self.output_dir,
        }

    def config_hash(self) -> str:
        """64-bit content hash; any field change changes it."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class SourceDistribution:
    """Per-source emotion proportions (the corpus-composition statistic)."""

    proportions: tuple[float, float, float, float]
    n_labeled: int
    n_unlabeled: int

    def as_dict(self) -> dict:
        return {
            "proportions": {e.value: p for e, p in zip(EMOTIONS, self.proportions)},
            "n_labeled": self.n_labeled,
            "n_unlabeled": self.n_unlabeled,
        }


def load_source(spec: SourceSpec, max_entropy: float | None = None) -> tuple[list[LabeledDoc], int]:
    """Materialize one source as labeled docs.

    Returns (docs, n_unlabeled); for reaction feeds, n_unlabeled counts
    posts that survived the optional entropy filter but produced no label
    (or had an empty message).
    """
    if spec.kind == "canonical_tsv":
        return corpus.load_canonical_tsv(spec.path), 0
    if spec.kind == "synthetic-spec":
        docs = corpus.synth_corpus(
            spec.n_docs,
            vocab_per_class=spec.vocab_per_class,
            noise_rate=spec.noise_rate,
            seed=spec.seed,
            tokens_per_doc=spec.tokens_per_doc,
            source=spec.name,
        )
        return docs, 0
    posts = corpus.load_reaction_feed(spec.path)
    if max_entropy is not None:
        posts = corpus.entropy_filter(posts, max_entropy)
    docs = []
    unlabeled = 0
    for post in posts:
        label = corpus.assign_label(post)
        if label is None or not post.message.strip():
            unlabeled += 1
            continue
        docs.append(LabeledDoc(post.message, label, spec.name))
    return docs, unlabeled


def distribution_of(docs: Sequence[LabeledDoc], n_unlabeled: int = 0) -> SourceDistribution:
    if not docs:
        raise DataError("no labeled posts in source")
    counts = {e: 0 for e in EMOTIONS}
    for doc in docs:
        counts[doc.label] += 1
    total = len(docs)
    return SourceDistribution(
        proportions=tuple(counts[e] / total for e in EMOTIONS),
        n_labeled=total,
        n_unlabeled=n_unlabeled,
    )


def source_distribution(
    sources: Sequence[SourceSpec], max_entropy: float | None = None
) -> dict[str, SourceDistribution]:
    """Emotion proportions per source, unlabeled posts counted separately."""
    out = {}
    for spec in sources:
        docs, unlabeled = load_source(spec, max_entropy)
        try:
            out[spec.name] = distribution_of(docs, unlabeled)
        except DataError as e:
            raise DataError(f"source {spec.name!r}: {e}") from e
    return out


@dataclass
class RunRecord:
    config_hash: str
    reports: dict[str, EvalReport]
    timings: dict[str, float]
    distributions: dict[str, SourceDistribution]
    n_train_docs: int
    output_dir: str

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "micro_f1": {name: r.micro_f1 for name, r in self.reports.items()},
            "timings": self.timings,
            "distributions": {name: d.as_dict() for name, d in self.distributions.items()},
            "n_train_docs": self.n_train_docs,
            "output_dir": self.output_dir,
        }


@contextmanager
def _stage(name: str, timings: dict[str, float]):
    start = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except BaseException as e:
        raise StageError(name, e) from e
    finally:
        timings[name] = time.perf_counter() - start


def run(config: ExperimentConfig) -> RunRecord:
    """Execute the full pipeline described by ``config``.

    Deterministic for a fixed config: every random choice is seeded from
    config fields, and the report and model files it writes are
    byte-stable.  On failure the stage name is attached to the error and
    any partially written outputs are removed.
    """
    timings: dict[str, float] = {}
    written: list[Path] = []
    try:
        with _stage("load-sources", timings):
            per_source: dict[str, tuple[list[LabeledDoc], int]] = {}
            for spec in config.sources:
                per_source[spec.name] = load_source(spec, config.max_entropy)
            train_docs = [doc for docs, _ in per_source.values() for doc in docs]
            if not train_docs:
                raise DataError("no labeled training documents in any source")
            distributions = {
                name: distribution_of(docs, unlabeled)
                for name, (docs, unlabeled) in per_source.items()
            }

        with _stage("embeddings", timings):
            table = _build_embedding_table(config, train_docs)

        with _stage("features", timings):
            lexicon = Lexicon.load(config.lexicon) if config.features.lexicon else None
            vectorizer = Vectorizer(
                config.features,
                lexicon=lexicon,
                embeddings=table if config.features.embeddings else None,
            ).fit([d.text for d in train_docs])
            X = [vectorizer.transform(d.text) for d in train_docs]
            y = [d.label for d in train_docs]

        with _stage("train", timings):
            model = classifier.train(X, y, config.train)

        with _stage("evaluate", timings):
            reports: dict[str, EvalReport] = {}
            for ds in config.datasets:
                docs = corpus.load_canonical_tsv(ds.path)
                if not docs:
                    raise DataError(f"dataset {ds.name!r} is empty")
                gold = [d.label for d in docs]
                pred = [model.predict(vectorizer.transform(d.text)) for d in docs]
                reports[ds.name] = evaluate(gold, pred)

        record = RunRecord(
            config_hash=config.config_hash(),
            reports=reports,
            timings=timings,
            distributions=distributions,
            n_train_docs=len(train_docs),
            output_dir=config.output_dir,
        )

        with _stage("write-outputs", timings):
            out_dir = Path(config.output_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            written.append(out_dir / "vectorizer.json")
            vectorizer.save(written[-1])
            written.append(out_dir / "model.json")
            model.save(written[-1])
            if table is not None and config.embeddings.mode == "train":
                written.append(out_dir / "embeddings.txt")
                emb.write_vectors(table, written[-1])
            for name, report in reports.items():
                for fmt in ("tsv", "json"):
                    written.append(out_dir / f"report-{name}.{fmt}")
                    written[-1].write_bytes(render_report(report, fmt))
            written.append(out_dir / "run.json")
            written[-1].write_text(
                json.dumps(record.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
            )
        return record
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise


def _build_embedding_table(config: ExperimentConfig, train_docs: Sequence[LabeledDoc]):
    settings = config.embeddings
    if settings.mode == "none":
        return None
    if settings.mode == "load":
        table = emb.load_vectors(settings.path)
    else:
        tokenized = [features.tokenize(d.text, config.features.lowercase) for d in train_docs]
        table = emb.train_skipgram(
            tokenized,
            window=settings.window,
            lr=settings.lr,
            dim=settings.dim,
            min_count=settings.min_count,
            negatives=settings.negatives,
            epochs=settings.epochs,
            seed=settings.seed,
        )
    if settings.retrofit is not None:
        lexicon = Lexicon.load(settings.retrofit.lexicon)
        graph = emb.build_emotion_graph(lexicon, table, settings.retrofit.max_degree)
        table = emb.retrofit(table, graph, settings.retrofit.iterations)
    return table


@dataclass(frozen=True)
class SearchResult:
    names: tuple[str, ...]
    micro_f1: float


def page_search(
    candidates: Sequence[SourceSpec],
    dev: DatasetSpec,
    k_max: int,
    train_config: TrainConfig = TrainConfig(),
    *,
    max_entropy: float | None = None,
) -> list[SearchResult]:
    """Evaluate every non-empty source subset of size <= k_max on dev data.

    Each subset trains the basic model (tf-idf only) and is scored by dev
    micro-F1.  Results are sorted best-first; ties prefer smaller subsets,
    then lexicographic name order.
    """
    if not 1 <= k_max <= len(candidates):
        raise ConfigError(f"k_max must be in [1, {len(candidates)}]")
    if len(candidates) > MAX_SEARCH_CANDIDATES:
        raise ConfigError(f"at most {MAX_SEARCH_CANDIDATES} candidate sources are supported")
    names = [c.name for c in candidates]
    if len(set(names)) != len(names):
        raise ConfigError("candidate source names must be unique")

    docs_by_name = {c.name: load_source(c, max_entropy)[0] for c in candidates}
    dev_docs = corpus.load_canonical_tsv(dev.path)
    if not dev_docs:
        raise DataError(f"dev dataset {dev.name!r} is empty")
    gold = [d.label for d in dev_docs]

    results = []
    for size in range(1, k_max + 1):
        for subset in itertools.combinations(names, size):
            train_docs = [doc for name in subset for doc in docs_by_name[name]]
            vectorizer = Vectorizer(FeatureConfig()).fit([d.text for d in train_docs])
            X = [vectorizer.transform(d.text) for d in train_docs]
            y = [d.label for d in train_docs]
            model = classifier.train(X, y, train_config)
            pred = [model.predict(vectorizer.transform(d.text)) for d in dev_docs]
            results.append(SearchResult(subset, evaluate(gold, pred).micro_f1))
    results.sort(key=lambda r: (-r.micro_f1, len(r.names), r.names))
    return results
