"""Confusion matrix, one-vs-rest counts, the five per-class metrics, reports.

Percent rendering rounds half away from zero; 0/0 ratios are defined as 0.
The published evaluation table ships as a fixture so the metric math can be
checked end to end without any model run.
"""

from dataclasses import dataclass

import numpy as np

from .dataset import CSV_HEADER, ParseError
from .network import CLASS_NAMES

# published per-class one-vs-rest counts and their expected integer percents:
# class -> (TP, FP, TN, FN, (acc, f, prec, rec, spec))
REFERENCE_COUNTS = {
    "AK":  (11, 89, 1850, 55, (93, 13, 11, 17, 95)),
    "BCC": (54, 110, 1792, 49, (92, 40, 33, 52, 94)),
    "D":   (2, 27, 1955, 21, (98, 8, 7, 9, 99)),
    "M":   (105, 240, 1542, 118, (82, 37, 30, 47, 87)),
    "N":   (930, 101, 563, 411, (74, 78, 90, 69, 85)),
    "PBK": (94, 214, 1571, 126, (83, 36, 31, 43, 88)),
    "VL":  (4, 24, 1952, 25, (98, 14, 14, 14, 99)),
}

METRIC_NAMES = ("accuracy", "f_measure", "precision", "recall", "specificity")


@dataclass(frozen=True)
class BinaryCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ClassMetrics:
    accuracy: float
    f_measure: float
    precision: float
    recall: float
    specificity: float

    def rendered(self) -> tuple:
        """Integer-percent rendering of all five values."""
        return tuple(render_percent(getattr(self, m)) for m in METRIC_NAMES)


def render_percent(x: float) -> int:
    """Round 100*x half away from zero to an integer."""
    scaled = 100.0 * x
    return int(np.floor(scaled + 0.5)) if scaled >= 0 else int(np.ceil(scaled - 0.5))


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def confusion_matrix(truths, preds) -> np.ndarray:
    """7x7 tally; cell [t][p] counts samples of true class t predicted p."""
    if len(truths) != len(preds):
        raise ValueError(f"length mismatch: {len(truths)} truths vs {len(preds)} preds")
    if len(truths) == 0:
        raise ValueError("empty label lists")
    k = len(CLASS_NAMES)
    cm = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(truths, preds):
        cm[t][p] += 1
    return cm


def one_vs_rest(cm: np.ndarray, c: int) -> BinaryCounts:
    tp = int(cm[c, c])
    fn = int(cm[c].sum()) - tp
    fp = int(cm[:, c].sum()) - tp
    tn = int(cm.sum()) - tp - fp - fn
    return BinaryCounts(tp, fp, tn, fn)


def class_metrics(b: BinaryCounts) -> ClassMetrics:
    if b.total < 1:
        raise ValueError("all counts are zero")
    return ClassMetrics(
        accuracy=_ratio(b.tp + b.tn, b.total),
        # harmonic mean of precision and recall, in count form so 0/0 -> 0
        f_measure=_ratio(2 * b.tp, 2 * b.tp + b.fp + b.fn),
        precision=_ratio(b.tp, b.tp + b.fp),
        recall=_ratio(b.tp, b.tp + b.fn),
        specificity=_ratio(b.tn, b.tn + b.fp),
    )


def verify_reference_table(counts: dict | None = None) -> list:
    """Recompute every metric cell from the reference counts.

    Returns one (class, metric, computed, expected, ok) tuple per cell.
    """
    counts = REFERENCE_COUNTS if counts is None else counts
    report = []
    for cls in CLASS_NAMES:
        tp, fp, tn, fn, expected = counts[cls]
        rendered = class_metrics(BinaryCounts(tp, fp, tn, fn)).rendered()
        for metric, got, want in zip(METRIC_NAMES, rendered, expected):
            report.append((cls, metric, got, want, got == want))
    return report


_REPORT_COLUMNS = ("Disease", "TP", "FP", "TN", "FN", "Acc.", "F-meas.",
                   "Pre.", "Rec.(Sen.)", "Spe.")
REPORT_HEADER = ("%-8s" % _REPORT_COLUMNS[0]) + "".join(
    "%11s" % c for c in _REPORT_COLUMNS[1:])


def render_report(cm: np.ndarray) -> str:
    """Fixed-width per-class metric table plus the raw confusion matrix."""
    lines = [REPORT_HEADER]
    for c, cls in enumerate(CLASS_NAMES):
        b = one_vs_rest(cm, c)
        cells = (b.tp, b.fp, b.tn, b.fn) + class_metrics(b).rendered()
        lines.append(("%-8s" % cls) + "".join("%11d" % v for v in cells))
    lines.append("")
    lines.append("Confusion matrix (rows: true class, columns: predicted)")
    lines.append(("%-8s" % "") + "".join("%7s" % cls for cls in CLASS_NAMES))
    for c, cls in enumerate(CLASS_NAMES):
        lines.append(("%-8s" % cls) + "".join("%7d" % v for v in cm[c]))
    return "\n".join(lines) + "\n"


def parse_predictions(csv_text: str) -> list:
    """Parse a prediction-score CSV into (image_id, class index) pairs.

    Scores need not be one-hot; argmax decides, ties to the lowest index
    in canonical class order.
    """
    lines = [ln for ln in csv_text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ParseError(f"line 1: expected header {CSV_HEADER!r}")
    out = []
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.strip().split(",")
        if len(parts) != 8:
            raise ParseError(f"line {ln}: expected 8 fields, got {len(parts)}")
        try:
            scores = [float(v) for v in parts[1:]]
        except ValueError:
            raise ParseError(f"line {ln}: non-numeric score")
        out.append((parts[0], int(np.argmax(scores))))
    return out
