"""Confusion-matrix metrics, wall-clock timing, and comparison-report rendering."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

# Excluded baseline families, named in every rendered report.
OUT_OF_SCOPE_MODELS = ("Gradient Boosting", "XGBoost", "AdaBoost")


@dataclass(frozen=True)
class Confusion:
    """Counts for one designated positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _check_binary(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size < 1:
        raise ValueError("need at least one sample")
    for arr, name in ((y_true, "y_true"), (y_pred, "y_pred")):
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError(f"invalid label in {name}: values must be 0 or 1")
    return y_true.astype(int), y_pred.astype(int)


def confusion(y_true, y_pred, positive_class: int) -> Confusion:
    """Exact confusion counts with ``positive_class`` treated as positive."""
    y_true, y_pred = _check_binary(y_true, y_pred)
    if positive_class not in (0, 1):
        raise ValueError("invalid label: positive_class must be 0 or 1")
    pos_t = y_true == positive_class
    pos_p = y_pred == positive_class
    return Confusion(
        tp=int(np.sum(pos_t & pos_p)),
        fp=int(np.sum(~pos_t & pos_p)),
        tn=int(np.sum(~pos_t & ~pos_p)),
        fn=int(np.sum(pos_t & ~pos_p)),
    )


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassMetrics:
    """Per-class precision/recall/F1 plus overall accuracy.

    Zero-denominator convention: precision is 0 with no predicted positives,
    recall is 0 with no actual positives, and F1 is 0 when both are 0.
    """

    class0: ClassScores
    class1: ClassScores
    accuracy: float

    def for_class(self, c: int) -> ClassScores:
        if c == 0:
            return self.class0
        if c == 1:
            return self.class1
        raise ValueError("class must be 0 or 1")

    @property
    def macro_f1(self) -> float:
        return 0.5 * (self.class0.f1 + self.class1.f1)


def _scores_from(conf: Confusion) -> ClassScores:
    precision = conf.tp / (conf.tp + conf.fp) if conf.tp + conf.fp > 0 else 0.0
    recall = conf.tp / (conf.tp + conf.fn) if conf.tp + conf.fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return ClassScores(precision, recall, f1, conf.tp + conf.fn)


def per_class_metrics(y_true, y_pred) -> ClassMetrics:
    """Metrics with each class treated as positive in turn."""
    c0 = confusion(y_true, y_pred, 0)
    c1 = confusion(y_true, y_pred, 1)
    accuracy = (c0.tp + c0.tn) / c0.total
    return ClassMetrics(_scores_from(c0), _scores_from(c1), accuracy)


def timed(operation, *args, **kwargs):
    """Run ``operation(*args, **kwargs)``; returns (result, wall seconds).

    Uses the monotonic high-resolution clock. If the operation raises, the
    elapsed time is attached to the exception as ``elapsed_seconds``.
    """
    start = time.perf_counter()
    try:
        result = operation(*args, **kwargs)
    except BaseException as exc:
        exc.elapsed_seconds = time.perf_counter() - start
        raise
    return result, time.perf_counter() - start


@dataclass
class ModelReport:
    """One evaluated model, ready for a comparison table row."""

    model_name: str
    feature_mode: str  # "full" or "topN"
    metrics: ClassMetrics
    train_seconds: float = 0.0
    predict_seconds: float = 0.0

    def display_mode(self) -> str:
        if self.feature_mode == "full":
            return "Full"
        if self.feature_mode.startswith("top"):
            return f"T{self.feature_mode[3:]}"
        return self.feature_mode


REPORT_COLUMNS = (
    "Precision(0)", "Precision(1)", "Recall(0)", "Recall(1)",
    "F1(0)", "F1(1)", "Training Time (s)", "Prediction Time (s)",
)


def _row_values(report: ModelReport) -> list:
    m = report.metrics
    return [
        f"{m.class0.precision:.2f}", f"{m.class1.precision:.2f}",
        f"{m.class0.recall:.2f}", f"{m.class1.recall:.2f}",
        f"{m.class0.f1:.2f}", f"{m.class1.f1:.2f}",
        f"{report.train_seconds:.4f}", f"{report.predict_seconds:.4f}",
    ]


def render_report(reports, format: str = "markdown") -> str:
    """Render Model/Precision/Recall/F1/timing rows as markdown or CSV.

    Metrics are rounded to 2 decimals and times to 4. CSV mode appends an
    accuracy column (an extension over the table layout) and both modes end
    with a footnote naming the out-of-scope boosting models.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("empty input: nothing to render")
    footnote = ("Not included (out of scope): " + ", ".join(OUT_OF_SCOPE_MODELS) + ".")
    if format == "markdown":
        lines = ["| Model | " + " | ".join(REPORT_COLUMNS) + " |",
                 "|" + " --- |" * (len(REPORT_COLUMNS) + 1)]
        for r in reports:
            label = f"{r.model_name} ({r.display_mode()})"
            lines.append("| " + " | ".join([label] + _row_values(r)) + " |")
        lines.append("")
        lines.append(f"*{footnote}*")
        return "\n".join(lines) + "\n"
    if format == "csv":
        header = ["model"] + [c.lower().replace(" ", "_").replace("(s)", "s")
                              .replace("(", "_").replace(")", "") for c in REPORT_COLUMNS]
        lines = [",".join(header + ["accuracy"])]
        for r in reports:
            label = f"{r.model_name} ({r.display_mode()})"
            lines.append(",".join([label] + _row_values(r) + [f"{r.metrics.accuracy:.4f}"]))
        lines.append("# " + footnote)
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r}")
