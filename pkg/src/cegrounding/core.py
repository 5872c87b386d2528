"""Domain types shared by the search, oracle, fusion and metric modules.

Frames are 1-based throughout: a video of ``T`` frames is addressed by
``1..T``.
"""
from __future__ import annotations

import abc
import enum
import math
from dataclasses import dataclass
from typing import Sequence

SIMPLEX_TOL = 1e-6
NEGATIVE_TOL = 1e-9


class ValidationError(ValueError):
    """Raised when a value violates a domain invariant."""


class GiClass(enum.IntEnum):
    """Three-way anatomical label, ordered by capsule transit."""

    EsophagusStomach = 1
    SmallIntestine = 2
    Colorectum = 3


def roundint(x: float) -> int:
    """Round half away from zero."""
    if x >= 0:
        return int(math.floor(x + 0.5))
    return -int(math.floor(-x + 0.5))


@dataclass(frozen=True)
class ConfidenceVector:
    """Per-frame category confidences on the 3-simplex.

    Build instances through :func:`validate_confidence`; the constructor
    trusts its input.
    """

    p: tuple[float, float, float]

    def __getitem__(self, cls: int) -> float:
        # 1-based, so p[GiClass.SmallIntestine] reads naturally
        return self.p[int(cls) - 1]

    def __iter__(self):
        return iter(self.p)

    @property
    def predicted(self) -> GiClass:
        return argmax_class(self)

    @property
    def confidence(self) -> float:
        return self[argmax_class(self)]


def validate_confidence(p: Sequence[float]) -> ConfidenceVector:
    """Check a raw 3-vector against the simplex and return it normalized.

    Components down to ``-1e-9`` are clamped to zero, then the vector is
    renormalized. Anything further off raises :class:`ValidationError`.
    """
    vals = [float(x) for x in p]
    if len(vals) != 3:
        raise ValidationError(f"expected 3 confidences, got {len(vals)}")
    for i, v in enumerate(vals, start=1):
        if not math.isfinite(v):
            raise ValidationError(f"confidence p[{i}]={v!r} is not finite")
        if v < -NEGATIVE_TOL:
            raise ValidationError(f"confidence p[{i}]={v!r} is negative")
    total = math.fsum(vals)
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise ValidationError(f"confidences sum to {total!r}, not 1 (components {vals!r})")
    vals = [max(v, 0.0) for v in vals]
    total = math.fsum(vals)
    return ConfidenceVector(tuple(v / total for v in vals))


def argmax_class(p: ConfidenceVector | Sequence[float]) -> GiClass:
    """Class with the largest confidence; ties go to the lowest index."""
    vals = p.p if isinstance(p, ConfidenceVector) else validate_confidence(p).p
    best = 0
    for i in (1, 2):
        if vals[i] > vals[best]:
            best = i
    return GiClass(best + 1)


@dataclass(frozen=True, order=True)
class Segment:
    """Inclusive frame range ``[start, end]``."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 1 or self.end < self.start:
            raise ValidationError(f"invalid segment [{self.start}, {self.end}]")

    def check_within(self, T: int) -> None:
        if self.end > T:
            raise ValidationError(f"segment [{self.start}, {self.end}] exceeds video length {T}")

    def __len__(self) -> int:
        return self.end - self.start + 1


def check_frame(t: int, T: int) -> None:
    if not 1 <= t <= T:
        raise ValidationError(f"frame {t} outside [1, {T}]")


class FrameClassifier(abc.ABC):
    """Oracle answering "which region is frame ``t`` in?".

    Implementations must be frozen: probing the same ``t`` twice returns the
    same vector. A classifier that looks at a window of ``2 * context_radius + 1``
    frames clamps that window to the video itself; the search only ever
    passes ``1 <= t <= video_length``.

    None of the shipped classifiers keep mutable state after construction,
    so concurrent probes are safe unless a subclass says otherwise.
    """

    context_radius: int = 0

    @abc.abstractmethod
    def classify(self, t: int, video_length: int) -> ConfidenceVector:
        ...

    def __call__(self, t: int, video_length: int) -> ConfidenceVector:
        return self.classify(t, video_length)
