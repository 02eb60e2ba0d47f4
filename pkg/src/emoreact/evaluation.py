"""Scoring predictions: confusion matrix, per-class P/R/F1, micro-average."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .corpus import EMOTIONS, Emotion
from .errors import DataError


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    # Zero-denominator metrics are reported as 0.0 and flagged here.
    precision_defined: bool = True
    recall_defined: bool = True


@dataclass(frozen=True)
class EvalReport:
    """Confusion matrix (gold rows x predicted columns, emotion ordinal
    order on both axes) plus derived per-class and pooled metrics."""

    matrix: tuple[tuple[int, ...], ...]
    per_class: dict[Emotion, ClassMetrics]
    micro_f1: float
    n_instances: int

    def accuracy(self) -> float:
        correct = sum(self.matrix[i][i] for i in range(len(EMOTIONS)))
        return correct / self.n_instances


def evaluate(gold: Sequence[Emotion], pred: Sequence[Emotion]) -> EvalReport:
    """Score predictions against gold labels.

    Per-class precision/recall use 0.0 when their denominator is empty;
    micro-F1 pools true/false positives and negatives over all classes.
    Classes absent from both gold and pred get no per-class row, but the
    matrix always spans all four emotions.
    """
    if len(gold) != len(pred):
        raise ValueError(f"gold has {len(gold)} labels, pred has {len(pred)}")
    if not gold:
        raise ValueError("cannot evaluate an empty label sequence")
    k = len(EMOTIONS)
    matrix = [[0] * k for _ in range(k)]
    for g, p in zip(gold, pred):
        matrix[g.ordinal][p.ordinal] += 1

    per_class: dict[Emotion, ClassMetrics] = {}
    pooled_tp = pooled_fp = pooled_fn = 0
    for e in EMOTIONS:
        i = e.ordinal
        tp = matrix[i][i]
        fp = sum(matrix[j][i] for j in range(k)) - tp
        fn = sum(matrix[i]) - tp
        pooled_tp += tp
        pooled_fp += fp
        pooled_fn += fn
        if tp + fp + fn == 0:
            continue  # absent from both gold and pred
        p_defined = (tp + fp) > 0
        r_defined = (tp + fn) > 0
        precision = tp / (tp + fp) if p_defined else 0.0
        recall = tp / (tp + fn) if r_defined else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_class[e] = ClassMetrics(precision, recall, f1, tp + fn, p_defined, r_defined)

    micro_p = pooled_tp / (pooled_tp + pooled_fp) if pooled_tp + pooled_fp else 0.0
    micro_r = pooled_tp / (pooled_tp + pooled_fn) if pooled_tp + pooled_fn else 0.0
    micro_f1 = 2 * micro_p * micro_r / (micro_p + micro_r) if micro_p + micro_r else 0.0
    return EvalReport(
        matrix=tuple(tuple(row) for row in matrix),
        per_class=per_class,
        micro_f1=micro_f1,
        n_instances=len(gold),
    )


REPORT_FORMATS = ("tsv", "json", "pretty")
_REPORT_FORMAT_NAME = "emoreact-eval-report"
_REPORT_VERSION = 1


def render_report(report: EvalReport, fmt: str = "pretty") -> bytes:
    """Render a report; tsv and json output is byte-stable for a given
    report.  tsv and pretty round to 3 decimals, json keeps full floats."""
    if fmt == "tsv":
        return _render_tsv(report)
    if fmt == "json":
        return _render_json(report)
    if fmt == "pretty":
        return _render_pretty(report)
    raise ValueError(f"unknown report format {fmt!r}; expected one of {REPORT_FORMATS}")


def _render_tsv(report: EvalReport) -> bytes:
    lines = ["class\tprecision\trecall\tf1\n"]
    for e in EMOTIONS:
        m = report.per_class.get(e)
        if m is None:
            continue
        lines.append(f"{e.value}\t{m.precision:.3f}\t{m.recall:.3f}\t{m.f1:.3f}\n")
    micro = report.micro_f1
    lines.append(f"micro\t{micro:.3f}\t{micro:.3f}\t{micro:.3f}\n")
    return "".join(lines).encode("utf-8")


def _render_json(report: EvalReport) -> bytes:
    doc = {
        "format": _REPORT_FORMAT_NAME,
        "version": _REPORT_VERSION,
        "labels": [e.value for e in EMOTIONS],
        "matrix": [list(row) for row in report.matrix],
        "per_class": {
            e.value: {
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "support": m.support,
                "precision_defined": m.precision_defined,
                "recall_defined": m.recall_defined,
            }
            for e, m in report.per_class.items()
        },
        "micro_f1": report.micro_f1,
        "n_instances": report.n_instances,
    }
    return (json.dumps(doc, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def report_from_json(data: bytes | str) -> EvalReport:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    doc = json.loads(data)
    if doc.get("format") != _REPORT_FORMAT_NAME:
        raise DataError(f"not an eval report (format={doc.get('format')!r})")
    if doc.get("version") != _REPORT_VERSION:
        raise DataError(f"unsupported report version {doc.get('version')!r}")
    per_class = {
        Emotion(name): ClassMetrics(
            m["precision"],
            m["recall"],
            m["f1"],
            m["support"],
            m["precision_defined"],
            m["recall_defined"],
        )
        for name, m in doc["per_class"].items()
    }
    return EvalReport(
        matrix=tuple(tuple(row) for row in doc["matrix"]),
        per_class=per_class,
        micro_f1=doc["micro_f1"],
        n_instances=doc["n_instances"],
    )


def _render_pretty(report: EvalReport) -> bytes:
    width = max(len("micro avg"), *(len(e.value) for e in EMOTIONS))
    lines = [f"{'':<{width}}  precision  recall  f1     support\n"]
    for e in EMOTIONS:
        m = report.per_class.get(e)
        if m is None:
            continue
        lines.append(
            f"{e.value:<{width}}  {m.precision:>9.3f}  {m.recall:>6.3f}  {m.f1:.3f}  {m.support:>7d}\n"
        )
    micro = report.micro_f1
    lines.append(
        f"{'micro avg':<{width}}  {micro:>9.3f}  {micro:>6.3f}  {micro:.3f}  {report.n_instances:>7d}\n"
    )
    return "".join(lines).encode("utf-8")
