"""One-vs-rest linear classification with a primal hinge-loss SGD trainer.

Each class is fit independently against the rest by minimizing

    0.5 * |w|^2 + C * sum_i c_i * max(0, 1 - y_i (w . x_i + b))^p

(p = 1 for hinge, 2 for squared hinge; c_i is the optional balanced class
weight) with epoch-wise seeded shuffling and step size 1 / (lambda * t + 1)
where lambda = 1 / (C * n).  The returned separator is the running mean of
the epoch-end iterates, which smooths SGD noise and is what the per-epoch
objective history tracks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import EMOTIONS, Emotion
from .errors import DataError
from .features import SparseVector

LOSSES = ("hinge", "squared_hinge")
CLASS_WEIGHT_MODES = ("uniform", "balanced")


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    epochs: int = 30
    seed: int = 0
    loss: str = "hinge"
    class_weight: str = "uniform"

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if self.class_weight not in CLASS_WEIGHT_MODES:
            raise ValueError(f"class_weight must be one of {CLASS_WEIGHT_MODES}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**data)


class LinearModel:
    """Per-class weight vectors and biases over one feature space."""

    FORMAT = "emoreact-linear-model"
    VERSION = 1

    def __init__(
        self,
        classes: Sequence[Emotion],
        weights: np.ndarray,
        biases: np.ndarray,
        meta: dict | None = None,
    ):
        weights = np.asarray(weights, dtype=np.float64)
        biases = np.asarray(biases, dtype=np.float64)
        if weights.ndim != 2 or weights.shape[0] != len(classes) or biases.shape != (len(classes),):
            raise ValueError("weights must be (n_classes, dim) and biases (n_classes,)")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(biases))):
            raise ValueError("model parameters must be finite")
        if list(classes) != sorted(classes, key=lambda e: e.ordinal):
            raise ValueError("classes must be in emotion ordinal order")
        self.classes: tuple[Emotion, ...] = tuple(classes)
        self.weights = weights
        self.biases = biases
        self.meta = dict(meta or {})
        self.weights.setflags(write=False)
        self.biases.setflags(write=False)

    @property
    def dim(self) -> int:
        return int(self.weights.shape[1])

    def decision_scores(self, x: SparseVector) -> np.ndarray:
        """w_c . x + b_c for every class, in emotion ordinal order."""
        if x.dim != self.dim:
            raise ValueError(f"feature dimension mismatch: {x.dim} != {self.dim}")
        if not x.nnz:
            return self.biases.copy()
        return self.weights[:, x.indices] @ x.values + self.biases

    def predict(self, x: SparseVector) -> Emotion:
        """Argmax of the class scores; ties go to the lowest ordinal."""
        return self.classes[int(np.argmax(self.decision_scores(x)))]

    def predict_many(self, xs: Sequence[SparseVector]) -> list[Emotion]:
        return [self.predict(x) for x in xs]

    # -- persistence -----------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "format": self.FORMAT,
            "version": self.VERSION,
            "classes": [c.value for c in self.classes],
            "weights": [list(row) for row in self.weights],
            "biases": list(self.biases),
            "meta": self.meta,
        }
        return json.dumps(doc, sort_keys=True, ensure_ascii=False)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, data: str) -> "LinearModel":
        doc = json.loads(data)
        if doc.get("format") != cls.FORMAT:
            raise DataError(f"not a model file (format={doc.get('format')!r})")
        if doc.get("version") != cls.VERSION:
            raise DataError(f"unsupported model version {doc.get('version')!r}")
        classes = [Emotion(c) for c in doc["classes"]]
        return cls(classes, np.array(doc["weights"]), np.array(doc["biases"]), doc.get("meta"))

    @classmethod
    def load(cls, path: str | Path) -> "LinearModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _to_csr(X: Sequence[SparseVector]) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    dim = X[0].dim
    indptr = np.zeros(len(X) + 1, dtype=np.int64)
    for i, x in enumerate(X):
        if x.dim != dim:
            raise ValueError(f"example {i} has dimension {x.dim}, expected {dim}")
        indptr[i + 1] = indptr[i] + x.nnz
    indices = np.concatenate([x.indices for x in X]) if len(X) else np.zeros(0, np.int64)
    values = np.concatenate([x.values for x in X]) if len(X) else np.zeros(0)
    return indptr, indices, values, dim


def binary_objective(
    w: np.ndarray,
    b: float,
    X: Sequence[SparseVector],
    y_signed: Sequence[float],
    C: float,
    loss: str = "hinge",
    example_weights: Sequence[float] | None = None,
) -> float:
    """0.5|w|^2 + C sum_i c_i max(0, 1 - y_i(w.x_i + b))^p, the quantity the
    trainer descends (used directly by the oracle tests)."""
    total = 0.5 * float(w @ w)
    power = 1 if loss == "hinge" else 2
    for i, x in enumerate(X):
        margin = y_signed[i] * (x.dot(w) + b)
        slack = max(0.0, 1.0 - margin)
        c_i = 1.0 if example_weights is None else example_weights[i]
        total += C * c_i * slack**power
    return total


def train(
    X: Sequence[SparseVector],
    y: Sequence[Emotion],
    config: TrainConfig = TrainConfig(),
    *,
    epoch_orders: Sequence[Sequence[int]] | None = None,
) -> LinearModel:
    """Fit one-vs-rest separators over sparse features.

    Deterministic for a fixed config: the only randomness is the per-epoch
    example shuffle drawn from a per-class generator seeded with
    (config.seed, class ordinal).  ``epoch_orders`` overrides the shuffle
    with explicit visit orders (one index sequence per epoch), which is a
    hook for tests that need to control data order exactly.

    The per-epoch objective of each class's averaged iterate is recorded
    in ``model.meta["objective_history"]``.
    """
    if len(X) != len(y):
        raise ValueError(f"got {len(X)} feature vectors but {len(y)} labels")
    if len(X) < 2:
        raise ValueError("need at least 2 training examples")
    present = set(y)
    if len(present) < 2:
        raise ValueError("need at least 2 distinct classes")
    classes = tuple(e for e in EMOTIONS if e in present)
    indptr, indices, values, dim = _to_csr(X)
    n = len(X)

    if config.class_weight == "balanced":
        counts = {c: sum(1 for label in y if label == c) for c in classes}
        per_class = {c: n / (len(classes) * counts[c]) for c in classes}
        example_weights = np.array([per_class[label] for label in y])
    else:
        example_weights = np.ones(n)

    if epoch_orders is not None:
        epoch_orders = [np.asarray(o, dtype=np.int64) for o in epoch_orders]
        if len(epoch_orders) != config.epochs or any(o.shape != (n,) for o in epoch_orders):
            raise ValueError("epoch_orders must hold one full index order per epoch")

    weights = np.zeros((len(classes), dim))
    biases = np.zeros(len(classes))
    history: dict[str, list[float]] = {}
    lam = 1.0 / (config.C * n)
    squared = config.loss == "squared_hinge"

    for k, cls in enumerate(classes):
        y_signed = np.where(np.array([label == cls for label in y]), 1.0, -1.0)
        rng = np.random.default_rng([config.seed, cls.ordinal])
        v = np.zeros(dim)
        scale = 1.0
        b = 0.0
        avg_w = np.zeros(dim)
        avg_b = 0.0
        t = 0
        obj: list[float] = []
        for epoch in range(config.epochs):
            order = epoch_orders[epoch] if epoch_orders is not None else rng.permutation(n)
            for i in order:
                t += 1
                eta = 1.0 / (lam * t + 1.0)
                row = slice(indptr[i], indptr[i + 1])
                idx = indices[row]
                val = values[row]
                margin = y_signed[i] * (scale * (v[idx] @ val) + b)
                scale *= 1.0 - eta * lam
                if scale < 1e-9:
                    v *= scale
                    scale = 1.0
                if margin < 1.0:
                    g = eta * example_weights[i] * y_signed[i]
                    if squared:
                        g *= 2.0 * (1.0 - margin)
                    v[idx] += (g / scale) * val
                    b += g
            w_epoch = scale * v
            avg_w += (w_epoch - avg_w) / (epoch + 1)
            avg_b += (b - avg_b) / (epoch + 1)
            obj.append(
                binary_objective(avg_w, avg_b, X, y_signed, config.C, config.loss, example_weights)
            )
        weights[k] = avg_w
        biases[k] = avg_b
        history[cls.value] = obj

    meta = config.to_dict()
    meta["dim"] = dim
    meta["n_train"] = n
    meta["objective_history"] = history
    return LinearModel(classes, weights, biases, meta)
