"""Sparse feature extraction: tf-idf, n-grams, surface cues, lexicon sums,
embedding averages, combined into one stable index space.

A fitted :class:`Vectorizer` owns the token vocabulary and document
frequencies for the token-based families and lays every enabled family
out as a contiguous block; block offsets are fixed once fitted, so
vectors produced for different documents always line up.
"""

from __future__ import annotations

import json
import math
import re
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .embeddings import EmbeddingTable
from .errors import DataError, RecordError

# Maximal runs of Unicode alphanumerics; underscores split like any other
# non-word character.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
# Surface cues keep case and apostrophes so contractions and shouting
# survive tokenization.
_SURFACE_TOKEN_RE = re.compile(r"[\w'’]+", re.UNICODE)
_PUNCT_CHARS = frozenset(string.punctuation)

DEFAULT_NEGATION_WORDS = frozenset(
    ["not", "no", "never", "n't", "none", "nobody", "nothing", "neither", "nor", "cannot"]
)

DEFAULT_STOPWORDS = frozenset(
    """a about above after again all am an and any are as at be because been
    before being below between both but by could did do does doing down during
    each few for from further had has have having he her here hers herself him
    himself his how i if in into is it its itself just me more most my myself
    of off on once only or other our ours ourselves out over own same she so
    some such than that the their theirs them themselves then there these they
    this those through to too under until up very was we were what when where
    which while who whom why will with you your yours yourself yourselves""".split()
)

# Block order is fixed; offsets for enabled families accumulate in this
# order once a vectorizer is fitted.
FAMILY_ORDER = (
    "tfidf",
    "word_ngrams",
    "char_ngrams",
    "negation",
    "punctuation",
    "lexicon",
    "embeddings",
)

NEGATION_BLOCK = ("negation_count", "negation_present")
PUNCTUATION_BLOCK = (
    "exclamation_count",
    "question_count",
    "punctuation_count",
    "punctuation_present",
    "allcaps_count",
)

VALENCE_NAMES = ("positive", "negative")

_TOKEN_FAMILY_PREFIX = {"tfidf": "t", "word_ngrams": "w", "char_ngrams": "c"}


class SparseVector:
    """Immutable sparse vector: strictly increasing indices, no stored zeros."""

    __slots__ = ("dim", "indices", "values")

    def __init__(self, dim: int, indices: Sequence[int] = (), values: Sequence[float] = ()):
        if dim < 0:
            raise ValueError("dimensionality must be >= 0")
        idx = np.asarray(indices, dtype=np.int64)
        val = np.asarray(values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-D and the same length")
        keep = val != 0.0
        idx, val = idx[keep], val[keep]
        order = np.argsort(idx, kind="stable")
        idx, val = idx[order], val[order]
        if idx.size:
            if idx[0] < 0 or idx[-1] >= dim:
                raise ValueError("index out of range")
            if np.any(idx[1:] == idx[:-1]):
                raise ValueError("duplicate index")
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    def __setattr__(self, name, value):  # immutability guard
        raise AttributeError("SparseVector is immutable")

    @classmethod
    def from_dict(cls, dim: int, entries: Mapping[int, float]) -> "SparseVector":
        return cls(dim, list(entries.keys()), list(entries.values()))

    @classmethod
    def from_dense(cls, dense: Sequence[float]) -> "SparseVector":
        arr = np.asarray(dense, dtype=np.float64)
        nz = np.nonzero(arr)[0]
        return cls(arr.size, nz, arr[nz])

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def items(self) -> Iterable[tuple[int, float]]:
        return zip(self.indices.tolist(), self.values.tolist())

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim)
        dense[self.indices] = self.values
        return dense

    def dot(self, dense: np.ndarray) -> float:
        if dense.shape[-1] != self.dim:
            raise ValueError(f"dimension mismatch: {dense.shape[-1]} != {self.dim}")
        if not self.indices.size:
            return 0.0
        return float(dense[self.indices] @ self.values)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.values @ self.values)) if self.indices.size else 0.0

    def normalized(self) -> "SparseVector":
        norm = self.l2_norm()
        if norm == 0.0:
            return self
        return SparseVector(self.dim, self.indices, self.values / norm)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.dim, self.indices.tobytes(), self.values.tobytes()))

    def __repr__(self):
        entries = ", ".join(f"{i}: {v:g}" for i, v in self.items())
        return f"SparseVector(dim={self.dim}, {{{entries}}})"


def combine(blocks: Sequence[SparseVector]) -> SparseVector:
    """Concatenate blocks at disjoint offsets, in declaration order."""
    total = sum(b.dim for b in blocks)
    indices: list[np.ndarray] = []
    values: list[np.ndarray] = []
    offset = 0
    for block in blocks:
        if block.nnz:
            indices.append(block.indices + offset)
            values.append(block.values)
        offset += block.dim
    if not indices:
        return SparseVector(total)
    return SparseVector(total, np.concatenate(indices), np.concatenate(values))


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    """Split text on non-alphanumeric boundaries (Unicode-aware)."""
    if lowercase:
        text = text.lower()
    return _TOKEN_RE.findall(text)


def word_ngrams(tokens: Sequence[str], low: int, high: int) -> list[tuple[str, ...]]:
    """All contiguous token n-grams for n in [low, high]."""
    if low < 1 or low > high:
        raise ValueError("need 1 <= low <= high")
    grams = []
    for n in range(low, high + 1):
        for i in range(len(tokens) - n + 1):
            grams.append(tuple(tokens[i : i + n]))
    return grams


def char_ngrams(text: str, low: int, high: int) -> list[str]:
    """All contiguous character n-grams of the whitespace-normalized text.

    Runs of whitespace collapse to a single space and the single spaces
    take part in the n-grams.
    """
    if low < 1 or low > high:
        raise ValueError("need 1 <= low <= high")
    normalized = " ".join(text.split())
    grams = []
    for n in range(low, high + 1):
        for i in range(len(normalized) - n + 1):
            grams.append(normalized[i : i + n])
    return grams


def surface_features(text: str, negation_words: frozenset[str] = DEFAULT_NEGATION_WORDS) -> list[float]:
    """Fixed 7-slot block of negation and punctuation cues.

    Layout: negation count, negation presence, '!' count, '?' count,
    punctuation count, punctuation presence, all-caps token count.
    """
    tokens = _SURFACE_TOKEN_RE.findall(text)
    neg = 0
    caps = 0
    for token in tokens:
        low = token.lower().replace("’", "'")
        if low in negation_words or low.endswith("n't"):
            neg += 1
        if len(token) >= 2 and token.isalpha() and token.isupper():
            caps += 1
    excl = text.count("!")
    quest = text.count("?")
    punct = sum(1 for ch in text if ch in _PUNCT_CHARS)
    return [
        float(neg),
        1.0 if neg else 0.0,
        float(excl),
        float(quest),
        float(punct),
        1.0 if punct else 0.0,
        float(caps),
    ]


def load_wordlist(path: str | Path) -> frozenset[str]:
    """Load a one-word-per-line override for the stopword/negation lists."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        word = line.strip().lower()
        if word:
            words.add(word)
    return frozenset(words)


class Lexicon:
    """Word -> emotion/valence boolean flags, NRC-style.

    Emotion names are whatever the source file provides (minus the two
    valence rows), sorted for a stable feature layout.
    """

    def __init__(self, entries: Mapping[str, Iterable[str]]):
        flags: dict[str, frozenset[str]] = {}
        names: set[str] = set()
        for word, word_flags in entries.items():
            fs = frozenset(word_flags)
            if not fs:
                continue
            flags[word] = fs
            names.update(fs)
        self._flags = flags
        self.emotions: tuple[str, ...] = tuple(sorted(names - set(VALENCE_NAMES)))

    @property
    def block_dim(self) -> int:
        return len(self.emotions) + len(VALENCE_NAMES)

    def __len__(self) -> int:
        return len(self._flags)

    def __contains__(self, word: str) -> bool:
        return word in self._flags

    def words(self) -> Iterable[str]:
        return self._flags.keys()

    def flags(self, word: str) -> frozenset[str]:
        return self._flags.get(word, frozenset())

    @classmethod
    def load(cls, path: str | Path) -> "Lexicon":
        """Parse a ``word<TAB>category<TAB>0|1`` TSV."""
        entries: dict[str, set[str]] = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise RecordError(f"expected 3 tab-separated fields, got {len(parts)}", lineno, unit="line")
            word, category, flag = parts
            if flag not in ("0", "1"):
                raise RecordError(f"association must be 0 or 1, got {flag!r}", lineno, unit="line")
            if flag == "1":
                entries.setdefault(word.lower(), set()).add(category)
        if not entries:
            raise DataError(f"lexicon {path} contains no positive associations")
        return cls(entries)


def load_toy_lexicon() -> Lexicon:
    """The small built-in lexicon used by the tests and examples."""
    with resources.as_file(resources.files("emoreact.data").joinpath("toy_lexicon.tsv")) as p:
        return Lexicon.load(p)


def lexicon_features(
    lexicon: Lexicon,
    tokens: Sequence[str],
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> list[float]:
    """Per-category sums of lexicon flags over the content tokens.

    Layout: one slot per lexicon emotion (sorted order) followed by the
    positive and negative valence slots.
    """
    sums = dict.fromkeys(lexicon.emotions + VALENCE_NAMES, 0.0)
    for token in tokens:
        if token in stopwords:
            continue
        for flag in lexicon.flags(token):
            sums[flag] += 1.0
    return list(sums.values())


def embed_sentence(
    table: EmbeddingTable,
    tokens: Sequence[str],
    weights: Mapping[str, float] | None = None,
) -> np.ndarray:
    """Mean (optionally weighted) of the in-vocabulary token vectors.

    Falls back to the zero vector when nothing is in vocabulary or the
    weights of the in-vocabulary tokens sum to zero.
    """
    acc = np.zeros(table.dim)
    total = 0.0
    for token in tokens:
        vec = table.get(token)
        if vec is None:
            continue
        w = 1.0 if weights is None else weights.get(token, 0.0)
        acc += w * vec
        total += w
    if total == 0.0:
        return np.zeros(table.dim)
    return acc / total


@dataclass(frozen=True)
class FeatureConfig:
    """Which feature families are enabled, and their knobs."""

    tfidf: bool = True
    word_ngrams: bool = False
    char_ngrams: bool = False
    negation: bool = False
    punctuation: bool = False
    lexicon: bool = False
    embeddings: bool = False
    word_ngram_range: tuple[int, int] = (2, 3)
    char_ngram_range: tuple[int, int] = (2, 5)
    min_freq: int = 1
    lowercase: bool = True
    sublinear_tf: bool = False
    tfidf_weighted_embeddings: bool = False

    def __post_init__(self):
        object.__setattr__(self, "word_ngram_range", tuple(self.word_ngram_range))
        object.__setattr__(self, "char_ngram_range", tuple(self.char_ngram_range))
        for name in ("word_ngram_range", "char_ngram_range"):
            low, high = getattr(self, name)
            if low < 1 or low > high:
                raise ValueError(f"{name} must satisfy 1 <= low <= high")
        if self.min_freq < 1:
            raise ValueError("min_freq must be >= 1")
        if not any(getattr(self, f) for f in FAMILY_ORDER):
            raise ValueError("at least one feature family must be enabled")
        if self.tfidf_weighted_embeddings and not self.tfidf:
            raise ValueError("tfidf_weighted_embeddings requires the tfidf family")

    def enabled_families(self) -> tuple[str, ...]:
        return tuple(f for f in FAMILY_ORDER if getattr(self, f))

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            value = getattr(self, f.name)
            d[f.name] = list(value) if isinstance(value, tuple) else value
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> "FeatureConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown feature config keys: {sorted(unknown)}")
        kwargs = dict(data)
        for name in ("word_ngram_range", "char_ngram_range"):
            if name in kwargs:
                kwargs[name] = tuple(kwargs[name])
        return cls(**kwargs)


class Vectorizer:
    """Fits a vocabulary over the enabled token families and maps text to
    one combined sparse vector.

    Token-family blocks (tf-idf unigrams, word n-grams, char n-grams) are
    weighted tf x idf with idf = ln((1 + n_docs) / (1 + df)) + 1 and each
    block L2-normalized on its own; surface, lexicon and embedding blocks
    are appended raw.  A fitted instance is immutable in practice and safe
    to share across threads.
    """

    FORMAT = "emoreact-vectorizer"
    VERSION = 1

    def __init__(
        self,
        config: FeatureConfig,
        *,
        lexicon: Lexicon | None = None,
        embeddings: EmbeddingTable | None = None,
        stopwords: frozenset[str] = DEFAULT_STOPWORDS,
        negation_words: frozenset[str] = DEFAULT_NEGATION_WORDS,
    ):
        if config.lexicon and lexicon is None:
            raise ValueError("config enables lexicon features but no lexicon was given")
        if config.embeddings and embeddings is None:
            raise ValueError("config enables embedding features but no table was given")
        self.config = config
        self.lexicon = lexicon
        self.embeddings = embeddings
        self.stopwords = stopwords
        self.negation_words = negation_words
        self.vocabulary: dict[str, int] = {}
        self.df: dict[str, int] = {}
        self.n_docs_fitted = 0
        self._token_block_dims: dict[str, int] = {}

    # -- fitting ---------------------------------------------------------

    def fit(self, texts: Iterable[str]) -> "Vectorizer":
        texts = list(texts)
        if not texts:
            raise ValueError("cannot fit on an empty document list")
        totals: Counter[str] = Counter()
        df: Counter[str] = Counter()
        for text in texts:
            terms = self._document_terms(text)
            totals.update(terms)
            df.update(set(terms))
        self.n_docs_fitted = len(texts)
        self.vocabulary = {}
        self.df = {}
        self._token_block_dims = {}
        for family in self.config.enabled_families():
            prefix = _TOKEN_FAMILY_PREFIX.get(family)
            if prefix is None:
                continue
            kept = sorted(
                t for t, c in totals.items()
                if t.startswith(prefix + "|") and c >= self.config.min_freq
            )
            for term in kept:
                self.vocabulary[term] = len(self.vocabulary)
                self.df[term] = df[term]
            self._token_block_dims[family] = len(kept)
        return self

    def _document_terms(self, text: str) -> list[str]:
        """All namespaced token-family terms of one document."""
        cfg = self.config
        terms: list[str] = []
        tokens = tokenize(text, cfg.lowercase)
        if cfg.tfidf:
            terms.extend("t|" + tok for tok in tokens)
        if cfg.word_ngrams:
            low, high = cfg.word_ngram_range
            terms.extend("w|" + " ".join(g) for g in word_ngrams(tokens, low, high))
        if cfg.char_ngrams:
            low, high = cfg.char_ngram_range
            source = text.lower() if cfg.lowercase else text
            terms.extend("c|" + g for g in char_ngrams(source, low, high))
        return terms

    # -- layout ----------------------------------------------------------

    def block_layout(self) -> list[tuple[str, int, int]]:
        """(family, offset, dim) for every enabled family, in block order."""
        self._require_fitted()
        layout = []
        offset = 0
        for family in self.config.enabled_families():
            dim = self._block_dim(family)
            layout.append((family, offset, dim))
            offset += dim
        return layout

    def _block_dim(self, family: str) -> int:
        if family in _TOKEN_FAMILY_PREFIX:
            return self._token_block_dims[family]
        if family == "negation":
            return len(NEGATION_BLOCK)
        if family == "punctuation":
            return len(PUNCTUATION_BLOCK)
        if family == "lexicon":
            assert self.lexicon is not None
            return self.lexicon.block_dim
        if family == "embeddings":
            assert self.embeddings is not None
            return self.embeddings.dim
        raise ValueError(f"unknown family {family!r}")

    @property
    def dim(self) -> int:
        return sum(d for _, _, d in self.block_layout())

    def _require_fitted(self):
        if self.n_docs_fitted == 0:
            raise ValueError("vectorizer is not fitted")

    # -- transforming ----------------------------------------------------

    def idf(self, term: str) -> float:
        self._require_fitted()
        return math.log((1 + self.n_docs_fitted) / (1 + self.df.get(term, 0))) + 1.0

    def transform(self, text: str) -> SparseVector:
        """Map one document into the combined feature space."""
        self._require_fitted()
        cfg = self.config
        tokens = tokenize(text, cfg.lowercase)
        blocks = []
        for family in cfg.enabled_families():
            if family in _TOKEN_FAMILY_PREFIX:
                blocks.append(self._token_block(family, text, tokens))
            elif family == "negation":
                full = surface_features(text, self.negation_words)
                blocks.append(SparseVector.from_dense(full[: len(NEGATION_BLOCK)]))
            elif family == "punctuation":
                full = surface_features(text, self.negation_words)
                blocks.append(SparseVector.from_dense(full[len(NEGATION_BLOCK):]))
            elif family == "lexicon":
                blocks.append(SparseVector.from_dense(lexicon_features(self.lexicon, tokens, self.stopwords)))
            elif family == "embeddings":
                weights = None
                if cfg.tfidf_weighted_embeddings:
                    weights = {
                        tok: tf * self.idf("t|" + tok)
                        for tok, tf in Counter(tokens).items()
                        if "t|" + tok in self.vocabulary
                    }
                blocks.append(SparseVector.from_dense(embed_sentence(self.embeddings, tokens, weights)))
        return combine(blocks)

    def _token_block(self, family: str, text: str, tokens: Sequence[str]) -> SparseVector:
        cfg = self.config
        prefix = _TOKEN_FAMILY_PREFIX[family]
        if family == "tfidf":
            terms = [prefix + "|" + tok for tok in tokens]
        elif family == "word_ngrams":
            low, high = cfg.word_ngram_range
            terms = [prefix + "|" + " ".join(g) for g in word_ngrams(tokens, low, high)]
        else:
            low, high = cfg.char_ngram_range
            source = text.lower() if cfg.lowercase else text
            terms = [prefix + "|" + g for g in char_ngrams(source, low, high)]
        offset = self._family_offset(family)
        entries: dict[int, float] = {}
        for term, tf in Counter(terms).items():
            index = self.vocabulary.get(term)
            if index is None:
                continue
            weight = (1.0 + math.log(tf)) if cfg.sublinear_tf else float(tf)
            entries[index - offset] = weight * self.idf(term)
        return SparseVector.from_dict(self._token_block_dims[family], entries).normalized()

    def _family_offset(self, family: str) -> int:
        """Offset of a token family inside the shared vocabulary index."""
        offset = 0
        for f in self.config.enabled_families():
            if f == family:
                return offset
            if f in _TOKEN_FAMILY_PREFIX:
                offset += self._token_block_dims[f]
        raise ValueError(f"family {family!r} not enabled")

    def transform_tfidf(self, text: str) -> SparseVector:
        """The tf-idf unigram block alone (L2-normalized)."""
        if not self.config.tfidf:
            raise ValueError("tfidf family is not enabled")
        return self._token_block("tfidf", text, tokenize(text, self.config.lowercase))

    # -- persistence -----------------------------------------------------

    def to_json(self) -> str:
        self._require_fitted()
        doc = {
            "format": self.FORMAT,
            "version": self.VERSION,
            "config": self.config.to_dict(),
            "n_docs": self.n_docs_fitted,
            "vocabulary": self.vocabulary,
            "df": self.df,
            "token_block_dims": self._token_block_dims,
            "lexicon_emotions": list(self.lexicon.emotions) if self.lexicon else None,
            "embedding_dim": self.embeddings.dim if self.embeddings else None,
        }
        return json.dumps(doc, sort_keys=True, ensure_ascii=False)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def from_json(
        cls,
        data: str,
        *,
        lexicon: Lexicon | None = None,
        embeddings: EmbeddingTable | None = None,
        stopwords: frozenset[str] = DEFAULT_STOPWORDS,
        negation_words: frozenset[str] = DEFAULT_NEGATION_WORDS,
    ) -> "Vectorizer":
        doc = json.loads(data)
        if doc.get("format") != cls.FORMAT:
            raise DataError(f"not a vectorizer file (format={doc.get('format')!r})")
        if doc.get("version") != cls.VERSION:
            raise DataError(f"unsupported vectorizer version {doc.get('version')!r}")
        config = FeatureConfig.from_dict(doc["config"])
        vec = cls(
            config,
            lexicon=lexicon,
            embeddings=embeddings,
            stopwords=stopwords,
            negation_words=negation_words,
        )
        if doc["lexicon_emotions"] is not None:
            if lexicon is None or list(lexicon.emotions) != doc["lexicon_emotions"]:
                raise DataError("vectorizer was fitted with a different lexicon")
        if doc["embedding_dim"] is not None:
            if embeddings is None or embeddings.dim != doc["embedding_dim"]:
                raise DataError("vectorizer was fitted with a different embedding table")
        vec.vocabulary = {str(k): int(v) for k, v in doc["vocabulary"].items()}
        vec.df = {str(k): int(v) for k, v in doc["df"].items()}
        vec.n_docs_fitted = int(doc["n_docs"])
        vec._token_block_dims = {str(k): int(v) for k, v in doc["token_block_dims"].items()}
        return vec

    @classmethod
    def load(cls, path: str | Path, **resources_kwargs) -> "Vectorizer":
        return cls.from_json(Path(path).read_text(encoding="utf-8"), **resources_kwargs)


def fit_vectorizer(
    texts: Iterable[str],
    config: FeatureConfig,
    **resources_kwargs,
) -> Vectorizer:
    """Convenience wrapper: construct and fit a :class:`Vectorizer`."""
    return Vectorizer(config, **resources_kwargs).fit(texts)
