"""Grounding and classification metrics."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import GiClass, Segment, ValidationError
from .oracles import ConfusionMatrix


def segment_iou(pred: Segment, truth: Segment) -> float:
    """Intersection over union of two inclusive frame ranges."""
    inter = min(pred.end, truth.end) - max(pred.start, truth.start) + 1
    if inter <= 0:
        return 0.0
    return inter / (len(pred) + len(truth) - inter)


@dataclass(frozen=True)
class GroundingResult:
    predicted: Segment
    truth: Segment
    oracle_calls: int = 0

    @property
    def iou(self) -> float:
        return segment_iou(self.predicted, self.truth)

    @property
    def start_error(self) -> int:
        return abs(self.predicted.start - self.truth.start)

    @property
    def end_error(self) -> int:
        return abs(self.predicted.end - self.truth.end)


def micro_macro_accuracy(n: Sequence[int], c: Sequence[int]) -> tuple[float, float]:
    """Image-level (micro) and class-averaged (macro) accuracy.

    ``n[i]`` frames of class ``i+1`` of which ``c[i]`` were classified correctly.
    """
    n = [int(v) for v in n]
    c = [int(v) for v in c]
    if len(n) != 3 or len(c) != 3:
        raise ValidationError("need counts for exactly three classes")
    for i, (ni, ci) in enumerate(zip(n, c), start=1):
        if not 0 <= ci <= ni:
            raise ValidationError(f"class {i}: correct count {ci} outside [0, {ni}]")
    if sum(n) == 0:
        raise ValidationError("no samples")
    if any(ni == 0 for ni in n):
        raise ValidationError(f"macro accuracy undefined: class {n.index(0) + 1} has no samples")
    micro = sum(c) / sum(n)
    macro = sum(ci / ni for ci, ni in zip(c, n)) / 3
    return micro, macro


def class_counts(pairs: Iterable[tuple[int, int]]) -> tuple[list[int], list[int]]:
    """``(n, c)`` per class from ``(predicted, truth)`` pairs."""
    n, c = [0, 0, 0], [0, 0, 0]
    for pred, truth in pairs:
        n[int(truth) - 1] += 1
        c[int(truth) - 1] += int(pred) == int(truth)
    return n, c


def confusion_counts(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    counts = np.zeros((3, 3), dtype=np.int64)
    np.add.at(counts, (np.asarray(pred) - 1, np.asarray(truth) - 1), 1)
    return counts


def confusion_estimate(pairs: Iterable[tuple[GiClass | int, GiClass | int]]) -> ConfusionMatrix:
    """Column-normalized empirical ``P(pred | truth)``."""
    arr = np.asarray([(int(p), int(t)) for p, t in pairs], dtype=np.int64).reshape(-1, 2)
    counts = confusion_counts(arr[:, 0], arr[:, 1])
    empty = [j + 1 for j in range(3) if counts[:, j].sum() == 0]
    if empty:
        raise ValidationError(f"no samples with ground truth class {empty[0]}")
    return ConfusionMatrix.from_counts(counts)


@dataclass(frozen=True)
class DeviationSummary:
    """Box-plot statistics of absolute boundary errors, in frames.

    Quartiles interpolate linearly between order statistics (numpy's default
    "linear" method). Whiskers sit on the most extreme data within 1.5 IQR of
    the box.
    """

    median: float
    lower_quartile: float
    upper_quartile: float
    mean: float
    whisker_low: float
    whisker_high: float
    count: int

    def as_dict(self) -> dict:
        return asdict(self)


def deviation_summary(errors: Sequence[float]) -> DeviationSummary:
    x = np.sort(np.asarray(errors, dtype=float))
    if x.size == 0:
        raise ValidationError("no deviations to summarize")
    q1, med, q3 = np.percentile(x, [25, 50, 75], method="linear")
    iqr = q3 - q1
    inside = x[(x >= q1 - 1.5 * iqr) & (x <= q3 + 1.5 * iqr)]
    return DeviationSummary(
        median=float(med),
        lower_quartile=float(q1),
        upper_quartile=float(q3),
        mean=float(x.mean()),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        count=int(x.size),
    )


def mean_ci95(values: Sequence[float]) -> tuple[float, float, float]:
    """Mean and a normal-approximation 95% interval."""
    v = np.asarray(values, dtype=float)
    mean = float(v.mean())
    if v.size < 2:
        return mean, mean, mean
    half = 1.96 * float(v.std(ddof=1)) / np.sqrt(v.size)
    return mean, float(mean - half), float(mean + half)
