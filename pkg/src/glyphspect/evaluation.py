"""Per-pair scoring: confusion counts, sensitivity/specificity/accuracy,
and the five-column report table (plus a machine-readable CSV).

The positive class of a pair is its "correct" character; sensitivity is the
recall on it, specificity the recall on the confusable partner. Undefined
ratios (a zero denominator from a one-sided test fold) are reported as
absent rather than silently 0 or 100.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

from .svm import SvmModel, predict_pair

__all__ = [
    "ConfusionCounts",
    "PairMetrics",
    "evaluate_pair",
    "metrics",
    "format_percent",
    "report_table",
    "report_csv",
]

TABLE_HEADERS = (
    "Correct Character",
    "Error Character",
    "Sensitivity",
    "Specificity",
    "Accuracy",
)

CSV_HEADERS = (
    "correct",
    "error",
    "tp",
    "fp",
    "tn",
    "fn",
    "sensitivity",
    "specificity",
    "accuracy",
)


@dataclass(frozen=True)
class ConfusionCounts:
    """Tallies against the pair's positive ("correct") class."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class PairMetrics:
    """Percentages in [0, 100]; None marks an undefined ratio."""

    sensitivity: float | None
    specificity: float | None
    accuracy: float


def evaluate_pair(
    model: SvmModel,
    features: Sequence[Sequence[float]],
    labels: Sequence[str],
    positive: str | None = None,
) -> ConfusionCounts:
    """Score predictions against truth for one confusable pair.

    `positive` defaults to the model's positive class; passing the other
    class swaps the roles (and thereby sensitivity and specificity).
    """
    if len(features) != len(labels):
        raise ValueError("features and labels lengths differ")
    if positive is None:
        positive = model.pos_class
    if positive not in (model.pos_class, model.neg_class):
        raise ValueError(f"'{positive}' is not a class of this model")
    negative = model.neg_class if positive == model.pos_class else model.pos_class

    tp = fp = tn = fn = 0
    for row, truth in zip(features, labels):
        if truth not in (positive, negative):
            raise ValueError(f"foreign label '{truth}' in test set")
        predicted = predict_pair(model, row)
        if truth == positive:
            if predicted == positive:
                tp += 1
            else:
                fn += 1
        else:
            if predicted == positive:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def metrics(counts: ConfusionCounts) -> PairMetrics:
    """Percent sensitivity, specificity, and accuracy from raw counts."""
    if counts.total == 0:
        raise ValueError("cannot compute metrics for zero samples")
    pos = counts.tp + counts.fn
    neg = counts.tn + counts.fp
    sensitivity = 100.0 * counts.tp / pos if pos else None
    specificity = 100.0 * counts.tn / neg if neg else None
    accuracy = 100.0 * (counts.tp + counts.tn) / counts.total
    return PairMetrics(
        sensitivity=sensitivity, specificity=specificity, accuracy=accuracy
    )


def format_percent(value: float | None) -> str:
    """Up to 3 decimals with trailing zeros trimmed; absent values render as a dash."""
    if value is None:
        return "—"
    text = f"{value:.3f}".rstrip("0").rstrip(".")
    return text or "0"


def report_table(
    rows: Sequence[tuple[tuple[str, str], PairMetrics]]
) -> str:
    """Render the five-column per-pair report; ends with a newline."""
    cells = [list(TABLE_HEADERS)]
    for (correct, error), pm in rows:
        cells.append(
            [
                correct,
                error,
                format_percent(pm.sensitivity),
                format_percent(pm.specificity),
                format_percent(pm.accuracy),
            ]
        )
    widths = [max(len(row[i]) for row in cells) for i in range(len(TABLE_HEADERS))]
    lines = []
    for row in cells:
        line = "  ".join(cell.ljust(width) for cell, width in zip(row, widths))
        lines.append(line.rstrip())
    return "\n".join(lines) + "\n"


def report_csv(
    rows: Sequence[tuple[tuple[str, str], ConfusionCounts, PairMetrics]]
) -> str:
    """Counts plus metrics per pair; absent metrics become empty cells."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADERS)
    for (correct, error), counts, pm in rows:
        writer.writerow(
            [
                correct,
                error,
                counts.tp,
                counts.fp,
                counts.tn,
                counts.fn,
                "" if pm.sensitivity is None else format_percent(pm.sensitivity),
                "" if pm.specificity is None else format_percent(pm.specificity),
                format_percent(pm.accuracy),
            ]
        )
    return buf.getvalue()
