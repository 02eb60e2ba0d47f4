"""Word-vector tables: text-format I/O, desk-scale skip-gram training, and
retrofitting toward a lexicon-derived emotion graph."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, RecordError

if TYPE_CHECKING:
    from .features import Lexicon

log = logging.getLogger(__name__)


class EmbeddingTable:
    """Immutable word -> fixed-dimension real vector map."""

    def __init__(self, words: Sequence[str], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(words):
            raise ValueError("vectors must be a (len(words), dim) matrix")
        if len(set(words)) != len(words):
            raise ValueError("duplicate words in table")
        self.words: tuple[str, ...] = tuple(words)
        self.vectors = vectors.copy()
        self.vectors.setflags(write=False)
        self._index = {w: i for i, w in enumerate(self.words)}

    @classmethod
    def from_dict(cls, mapping: Mapping[str, Sequence[float]]) -> "EmbeddingTable":
        words = list(mapping.keys())
        return cls(words, np.array([mapping[w] for w in words], dtype=np.float64))

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def get(self, word: str) -> np.ndarray | None:
        """Read-only view of the word's vector, or None if absent."""
        i = self._index.get(word)
        return None if i is None else self.vectors[i]

    def __getitem__(self, word: str) -> np.ndarray:
        vec = self.get(word)
        if vec is None:
            raise KeyError(word)
        return vec


def parse_vectors(text: str) -> EmbeddingTable:
    """Parse word2vec text format: a ``count dim`` header then one
    ``word v1 ... vd`` line per word."""
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DataError("vector file is empty")
    header = lines[0].split()
    if len(header) != 2:
        raise RecordError("header must be 'count dim'", 1, unit="line")
    try:
        declared, dim = int(header[0]), int(header[1])
    except ValueError:
        raise RecordError("header must hold two integers", 1, unit="line") from None
    if dim < 1:
        raise RecordError(f"dimension must be >= 1, got {dim}", 1, unit="line")

    order: list[str] = []
    rows: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        word, raw = parts[0], parts[1:]
        if len(raw) != dim:
            raise RecordError(f"expected {dim} values for {word!r}, got {len(raw)}", lineno, unit="line")
        try:
            vec = np.array([float(v) for v in raw])
        except ValueError:
            raise RecordError(f"unparseable float in row for {word!r}", lineno, unit="line") from None
        if word in rows:
            log.warning("duplicate word %r at line %d; keeping the later row", word, lineno)
        else:
            order.append(word)
        rows[word] = vec
    if len(order) != declared:
        log.warning("header declares %d words but file holds %d", declared, len(order))
    if not order:
        raise DataError("vector file has a header but no rows")
    return EmbeddingTable(order, np.stack([rows[w] for w in order]))


def load_vectors(path: str | Path) -> EmbeddingTable:
    return parse_vectors(Path(path).read_text(encoding="utf-8"))


def dump_vectors(table: EmbeddingTable) -> str:
    """Serialize to word2vec text format; floats use repr so they survive
    a parse round-trip bit-exactly."""
    out = [f"{len(table)} {table.dim}\n"]
    for word, vec in zip(table.words, table.vectors):
        if any(ch.isspace() for ch in word):
            raise ValueError(f"word {word!r} contains whitespace")
        out.append(word + " " + " ".join(repr(float(v)) for v in vec) + "\n")
    return "".join(out)


def write_vectors(table: EmbeddingTable, path: str | Path) -> None:
    Path(path).write_text(dump_vectors(table), encoding="utf-8", newline="")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -30.0, 30.0)))


def train_skipgram(
    corpus: Sequence[Sequence[str]],
    *,
    window: int = 5,
    lr: float = 0.01,
    dim: int = 100,
    min_count: int = 2,
    negatives: int = 5,
    epochs: int = 5,
    seed: int = 0,
    end_lr: float = 0.0001,
) -> EmbeddingTable:
    """Train skip-gram-with-negative-sampling input vectors.

    Words occurring fewer than ``min_count`` times are removed from both
    the vocabulary and the token stream before training.  The context
    span per position is drawn uniformly from [1, window], negatives are
    sampled from the unigram^0.75 distribution, and the learning rate
    decays linearly from ``lr`` to ``end_lr``.  Single-threaded and
    deterministic for a fixed seed.
    """
    if window < 1 or dim < 1 or negatives < 0 or epochs < 1 or min_count < 1:
        raise ValueError("invalid skip-gram hyperparameters")
    counts = Counter(tok for sent in corpus for tok in sent)
    # frequency order, ties lexicographic, so indices are deterministic
    vocab = sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: (-counts[w], w))
    if not vocab:
        raise DataError("vocabulary is empty after min-count filtering")
    index = {w: i for i, w in enumerate(vocab)}
    sentences = []
    for sent in corpus:
        ids = np.array([index[t] for t in sent if t in index], dtype=np.int64)
        if ids.size:
            sentences.append(ids)

    rng = np.random.default_rng(seed)
    n_words = len(vocab)
    vec_in = (rng.random((n_words, dim)) - 0.5) / dim
    vec_out = np.zeros((n_words, dim))

    freq = np.array([counts[w] for w in vocab], dtype=np.float64) ** 0.75
    noise_cdf = np.cumsum(freq / freq.sum())

    total_positions = sum(len(s) for s in sentences) * epochs
    processed = 0
    for _ in range(epochs):
        for si in rng.permutation(len(sentences)):
            sent = sentences[si]
            spans = rng.integers(1, window + 1, size=len(sent))
            for t in range(len(sent)):
                alpha = lr - (lr - end_lr) * (processed / total_positions)
                processed += 1
                b = spans[t]
                context = np.concatenate((sent[max(0, t - b): t], sent[t + 1: t + 1 + b]))
                if not context.size:
                    continue
                k = context.size
                if negatives:
                    noise = np.searchsorted(noise_cdf, rng.random(k * negatives))
                    targets = np.concatenate((context, noise))
                else:
                    targets = context
                labels = np.zeros(targets.size)
                labels[:k] = 1.0
                center = vec_in[sent[t]]
                out = vec_out[targets]
                grad = (labels - _sigmoid(out @ center)) * alpha
                delta_center = grad @ out
                np.add.at(vec_out, targets, grad[:, None] * center[None, :])
                vec_in[sent[t]] = center + delta_center
    if not np.all(np.isfinite(vec_in)):
        raise ArithmeticError("skip-gram training produced non-finite vectors")
    return EmbeddingTable(vocab, vec_in)


@dataclass(frozen=True)
class EmotionGraph:
    """Undirected word graph; neighbors share at least one emotion flag."""

    adjacency: dict[str, tuple[str, ...]]

    def __post_init__(self):
        for word, neighbors in self.adjacency.items():
            if word in neighbors:
                raise ValueError(f"self-loop on {word!r}")
            for n in neighbors:
                if word not in self.adjacency.get(n, ()):
                    raise ValueError(f"edge {word!r} -> {n!r} is not symmetric")

    def __len__(self) -> int:
        return len(self.adjacency)

    def words(self) -> tuple[str, ...]:
        return tuple(sorted(self.adjacency))

    def degree(self, word: str) -> int:
        return len(self.adjacency.get(word, ()))


def build_emotion_graph(lexicon: "Lexicon", table: EmbeddingTable, max_degree: int = 50) -> EmotionGraph:
    """Connect in-table words that share an emotion flag.

    Valence flags do not create edges.  Each word nominates at most
    ``max_degree`` neighbors in lexicographic order; the nominated edge
    set is then symmetrized.  Words left without neighbors are excluded.
    """
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    emotion_set = set(lexicon.emotions)
    members: dict[str, list[str]] = {e: [] for e in lexicon.emotions}
    in_graph = []
    for word in sorted(lexicon.words()):
        if word not in table:
            continue
        flags = lexicon.flags(word) & emotion_set
        if not flags:
            continue
        in_graph.append(word)
        for e in flags:
            members[e].append(word)

    edges: set[tuple[str, str]] = set()
    for word in in_graph:
        candidates: set[str] = set()
        for e in lexicon.flags(word) & emotion_set:
            candidates.update(members[e])
        candidates.discard(word)
        for neighbor in sorted(candidates)[:max_degree]:
            edges.add((min(word, neighbor), max(word, neighbor)))

    adjacency: dict[str, set[str]] = {}
    for a, b in edges:
        adjacency.setdefault(a, set()).add(b)
        adjacency.setdefault(b, set()).add(a)
    return EmotionGraph({w: tuple(sorted(ns)) for w, ns in sorted(adjacency.items())})


def _edge_weights(graph: EmotionGraph, beta: float | str) -> dict[tuple[str, str], float]:
    """Symmetric per-edge weights.

    ``"inverse-degree"`` uses the mean of the endpoints' inverse degrees;
    symmetry makes each retrofit update the exact coordinate minimizer of
    :func:`retrofit_objective`, which is what guarantees the objective
    never increases.
    """
    weights = {}
    for word, neighbors in graph.adjacency.items():
        for n in neighbors:
            if word < n:
                if beta == "inverse-degree":
                    w = 0.5 * (1.0 / graph.degree(word) + 1.0 / graph.degree(n))
                elif isinstance(beta, (int, float)) and beta > 0:
                    w = float(beta)
                else:
                    raise ValueError("beta must be a positive number or 'inverse-degree'")
                weights[(word, n)] = w
    return weights


def retrofit_objective(
    original: EmbeddingTable,
    current: EmbeddingTable,
    graph: EmotionGraph,
    alpha: float = 1.0,
    beta: float | str = "inverse-degree",
) -> float:
    """sum_i alpha * |q_i - q̂_i|^2 + sum_{edges} beta_ij * |q_i - q_j|^2.

    Graph words absent from the table contribute nothing, mirroring
    :func:`retrofit`, which never moves them.
    """
    total = 0.0
    for word in graph.adjacency:
        if word not in current:
            continue
        diff = current[word] - original[word]
        total += alpha * float(diff @ diff)
    for (a, b), w in _edge_weights(graph, beta).items():
        if a not in current or b not in current:
            continue
        diff = current[a] - current[b]
        total += w * float(diff @ diff)
    return total


def retrofit(
    table: EmbeddingTable,
    graph: EmotionGraph,
    iterations: int = 10,
    *,
    alpha: float = 1.0,
    beta: float | str = "inverse-degree",
    trace: list | None = None,
) -> EmbeddingTable:
    """Pull graph words toward their neighbors while anchoring them to
    their original vectors.

    Each sweep visits graph words in sorted order and replaces q_i with
    (alpha * q̂_i + sum_j beta_ij q_j) / (alpha + sum_j beta_ij), using the
    neighbors' current (already updated) positions.  Graph words missing
    from the table are ignored; everything else is returned unchanged.
    When ``trace`` is a list it receives one (objective, max_displacement)
    pair per sweep.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    words = [w for w in graph.words() if w in table]
    if not words:
        out = EmbeddingTable(table.words, table.vectors)
        if trace is not None:
            trace.extend([(0.0, 0.0)] * iterations)
        return out

    weights = _edge_weights(graph, beta)
    index = {w: i for i, w in enumerate(table.words)}
    vectors = np.array(table.vectors)
    anchors = {w: np.array(table.vectors[index[w]]) for w in words}
    neighbor_info = {
        w: [(index[n], weights[(min(w, n), max(w, n))]) for n in graph.adjacency[w] if n in index]
        for w in words
    }

    for _ in range(iterations):
        max_disp = 0.0
        for w in words:
            info = neighbor_info[w]
            if not info:
                continue
            num = alpha * anchors[w]
            den = alpha
            for n_row, wgt in info:
                num = num + wgt * vectors[n_row]
                den += wgt
            new = num / den
            disp = float(np.linalg.norm(new - vectors[index[w]]))
            max_disp = max(max_disp, disp)
            vectors[index[w]] = new
        if trace is not None:
            snapshot = EmbeddingTable(table.words, vectors)
            trace.append((retrofit_objective(table, snapshot, graph, alpha, beta), max_disp))
    return EmbeddingTable(table.words, vectors)
