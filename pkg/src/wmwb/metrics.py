"""Confusion matrices and per-class / macro-averaged scores.

Orientation: rows index the PREDICTED class, columns the TRUE class, so a
column holds everything a true class was predicted as. Zero-division
cases (a class never predicted, or absent from the data) score 0.0 and
are flagged rather than silently dropped from macro averages.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import IndexOutOfRangeError

REFERENCE_MACRO_SCORES = {
    # published full-pipeline comparison points (macro recall, precision, F1)
    "vgg16": (0.757, 0.812, 0.768),
    "resnet50": (0.856, 0.855, 0.834),
    "mobilenet_v2": (0.824, 0.785, 0.789),
}


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (n, n) int64, rows = predicted, cols = true
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        n = self.counts.shape[0]
        if self.counts.ndim != 2 or self.counts.shape[1] != n:
            raise IndexOutOfRangeError(f"confusion matrix must be square, got {self.counts.shape}")
        if not self.class_names:
            self.class_names = [str(i) for i in range(n)]
        if len(self.class_names) != n:
            raise IndexOutOfRangeError(
                f"{len(self.class_names)} names for a {n}-class matrix"
            )

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    def total(self) -> int:
        return int(self.counts.sum())

    def tp(self, i: int) -> int:
        return int(self.counts[i, i])

    def fp(self, i: int) -> int:
        return int(self.counts[i].sum() - self.counts[i, i])

    def fn(self, i: int) -> int:
        return int(self.counts[:, i].sum() - self.counts[i, i])

    def support(self, i: int) -> int:
        """True-instance count for class i (its column sum)."""
        return int(self.counts[:, i].sum())

    def normalized(self) -> np.ndarray:
        """Columns scaled to sum to 1; all-zero columns stay zero."""
        col = self.counts.sum(axis=0, keepdims=True).astype(np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(col > 0, self.counts / col, 0.0)
        return out

    def merged(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.counts.shape != self.counts.shape:
            raise IndexOutOfRangeError("cannot merge matrices of different sizes")
        return ConfusionMatrix(self.counts + other.counts, list(self.class_names))


def confusion_from_predictions(
    pairs, n_classes: int, class_names: list[str] | None = None
) -> ConfusionMatrix:
    """Accumulate (true_index, predicted_index) pairs into a matrix."""
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for true_i, pred_i in pairs:
        if not (0 <= true_i < n_classes and 0 <= pred_i < n_classes):
            raise IndexOutOfRangeError(
                f"pair ({true_i}, {pred_i}) outside [0, {n_classes})"
            )
        counts[pred_i, true_i] += 1
    return ConfusionMatrix(counts, class_names or [])


@dataclass
class ClassMetrics:
    name: str
    support: int
    tp: int
    fp: int
    fn: int
    recall: float
    precision: float
    f1: float
    undefined: frozenset[str]  # which of recall/precision/f1 hit zero-division


def class_metrics(cm: ConfusionMatrix, i: int) -> ClassMetrics:
    tp, fp, fn = cm.tp(i), cm.fp(i), cm.fn(i)
    undefined = set()
    recall = precision = f1 = 0.0
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        undefined.add("recall")
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        undefined.add("precision")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        undefined.add("f1")
    return ClassMetrics(
        name=cm.class_names[i],
        support=cm.support(i),
        tp=tp,
        fp=fp,
        fn=fn,
        recall=recall,
        precision=precision,
        f1=f1,
        undefined=frozenset(undefined),
    )


@dataclass
class MacroMetrics:
    recall: float
    precision: float
    f1: float
    undefined_classes: list[str]


def all_class_metrics(cm: ConfusionMatrix) -> list[ClassMetrics]:
    return [class_metrics(cm, i) for i in range(cm.n_classes)]


def macro_metrics(cm: ConfusionMatrix) -> MacroMetrics:
    """Unweighted means over classes; zero-division classes count as 0."""
    per = all_class_metrics(cm)
    return MacroMetrics(
        recall=float(np.mean([m.recall for m in per])),
        precision=float(np.mean([m.precision for m in per])),
        f1=float(np.mean([m.f1 for m in per])),
        undefined_classes=[m.name for m in per if m.undefined],
    )


@dataclass
class F1Histogram:
    bin_width: float
    counts: list[int]
    macro_f1: float

    @property
    def edges(self) -> list[float]:
        k = len(self.counts)
        return [i * self.bin_width for i in range(k + 1)]


def f1_histogram(f1_values, bin_width: float = 0.1) -> F1Histogram:
    """Distribution of per-class F1 over [0, 1].

    Bins are half-open [lo, hi) except the last, which includes 1.0.
    bin_width must divide 1 evenly.
    """
    k = round(1.0 / bin_width)
    if k < 1 or abs(k * bin_width - 1.0) > 1e-9:
        raise ValueError(f"bin width {bin_width} does not divide 1")
    vals = np.asarray(list(f1_values), dtype=np.float64)
    if vals.size and (vals.min() < 0 or vals.max() > 1):
        raise ValueError("F1 values must lie in [0, 1]")
    idx = np.minimum((vals / bin_width).astype(int), k - 1)
    counts = np.bincount(idx, minlength=k) if vals.size else np.zeros(k, dtype=int)
    macro = float(vals.mean()) if vals.size else 0.0
    return F1Histogram(bin_width=bin_width, counts=counts.tolist(), macro_f1=macro)


# --- report rendering ---------------------------------------------------------

def metrics_report(cm: ConfusionMatrix) -> dict:
    per = all_class_metrics(cm)
    macro = macro_metrics(cm)
    return {
        "n_classes": cm.n_classes,
        "total_examples": cm.total(),
        "per_class": [
            {
                "class": m.name,
                "support": m.support,
                "tp": m.tp,
                "fp": m.fp,
                "fn": m.fn,
                "recall": m.recall,
                "precision": m.precision,
                "f1": m.f1,
                "undefined": sorted(m.undefined),
            }
            for m in per
        ],
        "macro": {
            "recall": macro.recall,
            "precision": macro.precision,
            "f1": macro.f1,
            "undefined_classes": macro.undefined_classes,
        },
        "confusion": cm.counts.tolist(),
        "class_names": list(cm.class_names),
    }


def report_json(cm: ConfusionMatrix) -> str:
    return json.dumps(metrics_report(cm), indent=2) + "\n"


def report_csv(cm: ConfusionMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "support", "tp", "fp", "fn", "recall", "precision", "f1", "undefined"])
    for m in all_class_metrics(cm):
        w.writerow(
            [m.name, m.support, m.tp, m.fp, m.fn,
             f"{m.recall:.6f}", f"{m.precision:.6f}", f"{m.f1:.6f}",
             "+".join(sorted(m.undefined))]
        )
    macro = macro_metrics(cm)
    w.writerow(
        ["macro", cm.total(), "", "", "",
         f"{macro.recall:.6f}", f"{macro.precision:.6f}", f"{macro.f1:.6f}",
         "+".join(macro.undefined_classes)]
    )
    return buf.getvalue()


def normalized_csv(cm: ConfusionMatrix) -> str:
    """Column-normalized confusion matrix, one row per predicted class."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["predicted\\true"] + list(cm.class_names))
    for i, row in enumerate(cm.normalized()):
        w.writerow([cm.class_names[i]] + [f"{v:.6f}" for v in row])
    return buf.getvalue()
