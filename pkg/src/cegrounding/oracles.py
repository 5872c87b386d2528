"""Synthetic videos and the classifiers that answer search probes on them."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import (
    ConfidenceVector,
    FrameClassifier,
    GiClass,
    Segment,
    ValidationError,
    argmax_class,
    check_frame,
    roundint,
    validate_confidence,
)
from .fusion import FusionWeights, fuse_window, read_features, read_weights

# Share of frames per region across the clinical cohort.
PAPER_PROPORTIONS = (0.072, 0.449, 0.479)
FRAME_RATE = 3  # fps
# 11 h 35 min at 3 fps
PAPER_MEAN_FRAMES = FRAME_RATE * (11 * 3600 + 35 * 60)


@dataclass(frozen=True)
class VideoLayout:
    """Ground-truth region layout; frames ``t_s..t_e`` are small intestine."""

    T: int
    t_s: int
    t_e: int

    def __post_init__(self):
        if not 1 <= self.t_s <= self.t_e <= self.T:
            raise ValidationError(f"invalid layout T={self.T} t_s={self.t_s} t_e={self.t_e}")

    def class_at(self, t: int) -> GiClass:
        if t < self.t_s:
            return GiClass.EsophagusStomach
        if t <= self.t_e:
            return GiClass.SmallIntestine
        return GiClass.Colorectum

    def labels(self) -> np.ndarray:
        """Classes of frames ``1..T`` as an int array (index 0 is frame 1)."""
        y = np.full(self.T, 2, dtype=np.int64)
        y[: self.t_s - 1] = 1
        y[self.t_e:] = 3
        return y

    @property
    def segment(self) -> Segment:
        return Segment(self.t_s, self.t_e)

    def to_text(self) -> str:
        return f"{self.T} {self.t_s} {self.t_e}\n"

    @classmethod
    def from_text(cls, text: str) -> "VideoLayout":
        parts = text.split()
        if len(parts) != 3:
            raise ValidationError(f"layout needs 'T t_s t_e', got {text.strip()!r}")
        try:
            return cls(*(int(p) for p in parts))
        except ValueError as exc:
            raise ValidationError(f"layout fields must be integers: {text.strip()!r}") from exc


def read_layout(path: str | Path) -> VideoLayout:
    return VideoLayout.from_text(Path(path).read_text())


def write_layout(layout: VideoLayout, path: str | Path) -> None:
    Path(path).write_text(layout.to_text())


def generate_layout(T: int, proportions: Sequence[float] = PAPER_PROPORTIONS, seed: int = 0,
                    jitter: float = 0.1) -> VideoLayout:
    """Place the two boundaries at the cumulative proportions of ``T``.

    With ``jitter > 0`` each region's share is scaled by an independent
    uniform factor in ``[1 - jitter, 1 + jitter]`` and the shares are
    renormalized. Region 1 gets ``roundint(p1 * T)`` frames and region 3
    starts after frame ``roundint((p1 + p2) * T)``.
    """
    props = np.asarray(proportions, dtype=float)
    if props.shape != (3,) or np.any(props <= 0) or abs(props.sum() - 1) > 1e-6:
        raise ValidationError(f"proportions must be 3 positive shares summing to 1, got {list(proportions)}")
    if not 0 <= jitter < 1:
        raise ValidationError(f"jitter must lie in [0, 1), got {jitter}")
    if jitter:
        rng = np.random.default_rng(seed)
        props = props * rng.uniform(1 - jitter, 1 + jitter, size=3)
        props = props / props.sum()
    n1 = roundint(props[0] * T)
    t_e = roundint((props[0] + props[1]) * T)
    if n1 < 1 or t_e < n1 + 1 or t_e >= T:
        raise ValidationError(f"T={T} is too small for three non-empty regions with shares {props.tolist()}")
    return VideoLayout(T, n1 + 1, t_e)


# --- confusion matrices -------------------------------------------------------

@dataclass(frozen=True)
class ConfusionMatrix:
    """``m[pred-1, truth-1] = P(pred | truth)``; columns sum to 1."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (3, 3) or np.any(m < 0):
            raise ValidationError(f"confusion matrix must be a non-negative 3x3 array, got {m!r}")
        sums = m.sum(axis=0)
        if np.any(np.abs(sums - 1) > 1e-3):
            raise ValidationError(f"confusion matrix columns sum to {sums.tolist()}, not 1")
        object.__setattr__(self, "m", m / sums)

    @classmethod
    def from_counts(cls, counts) -> "ConfusionMatrix":
        """Normalize each column of raw counts or percentages."""
        c = np.asarray(counts, dtype=float)
        sums = c.sum(axis=0)
        if c.shape != (3, 3) or np.any(sums <= 0):
            raise ValidationError(f"every ground-truth column needs a positive total, got sums {sums.tolist()}")
        return cls(c / sums)

    def column(self, truth: GiClass | int) -> np.ndarray:
        return self.m[:, int(truth) - 1]

    def to_text(self) -> str:
        return "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in self.m)


def read_confusion(path: str | Path) -> ConfusionMatrix:
    """Three rows (predicted) of three numbers (truth); any column scale."""
    rows = [line.replace(",", " ").split() for line in Path(path).read_text().splitlines() if line.strip()]
    try:
        return ConfusionMatrix.from_counts([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


# Table of per-class prediction rates (percent) of the frame-level and
# transformer-fused classifiers; rows are predictions, columns ground truth.
RESNET = ConfusionMatrix.from_counts([
    [89.4, 4.6, 0.3],
    [8.8, 92.9, 11.3],
    [1.9, 2.5, 88.4],
])
RESNET_TFE = ConfusionMatrix.from_counts([
    [92.4, 2.5, 0.3],
    [7.2, 93.1, 7.3],
    [0.4, 4.4, 92.3],
])
PRESETS = {"resnet": RESNET, "resnet-tfe": RESNET_TFE}


def one_vs_rest(cls: GiClass | int, confidence: float) -> ConfidenceVector:
    """``confidence`` on ``cls``, the remainder split evenly over the other two."""
    rest = (1.0 - confidence) / 2
    p = [rest, rest, rest]
    p[int(cls) - 1] = confidence
    return ConfidenceVector(tuple(p))


# --- classifiers ------------------------------------------------------------

class PerfectOracle(FrameClassifier):
    """Always names the true region with a fixed confidence."""

    def __init__(self, layout: VideoLayout, confidence: float = 1.0):
        if not 1 / 3 < confidence <= 1:
            raise ValidationError(f"confidence must lie in (1/3, 1], got {confidence}")
        self.layout = layout
        self.confidence = confidence
        self._vectors = {c: one_vs_rest(c, confidence) for c in GiClass}

    def classify(self, t: int, video_length: int) -> ConfidenceVector:
        _check_length(video_length, self.layout.T)
        check_frame(t, video_length)
        return self._vectors[self.layout.class_at(t)]


def perfect_oracle(layout: VideoLayout, confidence: float = 1.0) -> PerfectOracle:
    return PerfectOracle(layout, confidence)


@dataclass(frozen=True)
class NoisyOracleConfig:
    matrix: ConfusionMatrix = RESNET_TFE
    confidence: float = 0.9
    # "fixed", or "beta": affine Beta on (1/3, 1] whose mean is `confidence`
    confidence_model: str = "fixed"
    concentration: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if not 1 / 3 < self.confidence <= 1:
            raise ValidationError(f"mean confidence must lie in (1/3, 1], got {self.confidence}")
        if self.confidence_model not in ("fixed", "beta"):
            raise ValidationError(f"unknown confidence model {self.confidence_model!r}")
        if self.concentration <= 0:
            raise ValidationError(f"concentration must be positive, got {self.concentration}")


class NoisyOracle(FrameClassifier):
    """Mislabels frames independently according to a confusion matrix.

    Every frame's draw is made once, up front, from a generator seeded by the
    config, so probe order never changes an answer.
    """

    def __init__(self, layout: VideoLayout, cfg: NoisyOracleConfig = NoisyOracleConfig()):
        self.layout = layout
        self.cfg = cfg
        rng = np.random.default_rng([cfg.seed, 0x0CE])
        truth = layout.labels()
        cdf = np.cumsum(cfg.matrix.m, axis=0)  # column j: CDF of predictions given truth j+1
        u = rng.random(layout.T)
        pred = np.empty(layout.T, dtype=np.int64)
        for j in range(3):
            rows = truth == j + 1
            pred[rows] = np.minimum(np.searchsorted(cdf[:, j], u[rows], side="right"), 2) + 1
        self.predicted = pred
        self.confidences = self._draw_confidences(rng, layout.T)

    def _draw_confidences(self, rng: np.random.Generator, n: int) -> np.ndarray:
        cfg = self.cfg
        if cfg.confidence_model == "fixed" or cfg.confidence == 1.0:
            return np.full(n, cfg.confidence)
        lo = 1 / 3
        mu = (cfg.confidence - lo) / (1 - lo)
        x = rng.beta(cfg.concentration * mu, cfg.concentration * (1 - mu), size=n)
        # keep the sampled class a strict argmax
        return np.maximum(lo + (1 - lo) * x, lo + 1e-9)

    def classify(self, t: int, video_length: int) -> ConfidenceVector:
        _check_length(video_length, self.layout.T)
        check_frame(t, video_length)
        return one_vs_rest(int(self.predicted[t - 1]), float(self.confidences[t - 1]))


def noisy_oracle(layout: VideoLayout, cfg: NoisyOracleConfig = NoisyOracleConfig()) -> NoisyOracle:
    return NoisyOracle(layout, cfg)


class FileOracle(FrameClassifier):
    """Serves confidences precomputed for every frame of a video."""

    def __init__(self, vectors: Sequence[ConfidenceVector]):
        self.vectors = list(vectors)

    @property
    def T(self) -> int:
        return len(self.vectors)

    def classify(self, t: int, video_length: int) -> ConfidenceVector:
        _check_length(video_length, self.T)
        check_frame(t, video_length)
        return self.vectors[t - 1]


def read_confidences(path: str | Path) -> list[ConfidenceVector]:
    """Parse ``<frame>,<p1>,<p2>,<p3>`` records covering frames ``1..T``."""
    by_frame: dict[int, ConfidenceVector] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ValidationError(f"{path}:{lineno}: expected '<frame>,<p1>,<p2>,<p3>'")
            try:
                t = int(parts[0])
                p = validate_confidence([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            if t in by_frame:
                raise ValidationError(f"{path}:{lineno}: duplicate frame {t}")
            by_frame[t] = p
    if not by_frame:
        raise ValidationError(f"{path}: no confidence records")
    T = max(by_frame)
    for t in range(1, T + 1):
        if t not in by_frame:
            raise ValidationError(f"{path}: missing frame {t}")
    if len(by_frame) != T:
        bad = min(by_frame)
        raise ValidationError(f"{path}: frame {bad} outside 1..{T}")
    return [by_frame[t] for t in range(1, T + 1)]


def write_confidences(vectors: Sequence[ConfidenceVector], path: str | Path) -> None:
    with open(path, "w") as fh:
        for t, p in enumerate(vectors, start=1):
            fh.write(f"{t},{p.p[0]!r},{p.p[1]!r},{p.p[2]!r}\n")


def file_oracle(path: str | Path) -> FileOracle:
    return FileOracle(read_confidences(path))


class FusionOracle(FrameClassifier):
    """Runs the fusion network over the ``2N+1`` window around each probe.

    Window slots before frame 1 or after frame ``T`` repeat the edge frame.
    """

    def __init__(self, features: np.ndarray, weights: FusionWeights, context_radius: Optional[int] = None):
        self.features = np.asarray(features, dtype=float)
        self.weights = weights
        N = weights.context_radius if context_radius is None else context_radius
        if 2 * N + 1 != weights.window:
            raise ValidationError(f"window 2N+1={2 * N + 1} does not match weights window {weights.window}")
        self.context_radius = N

    @property
    def T(self) -> int:
        return self.features.shape[0]

    def window_indices(self, t: int) -> np.ndarray:
        """1-based frames fed to the network for a probe at ``t``."""
        N = self.context_radius
        return np.clip(np.arange(t - N, t + N + 1), 1, self.T)

    def classify(self, t: int, video_length: int) -> ConfidenceVector:
        _check_length(video_length, self.T)
        check_frame(t, video_length)
        return fuse_window(self.features[self.window_indices(t) - 1], self.weights)


def fusion_oracle(feature_file: str | Path, weights_file: str | Path, N: Optional[int] = None) -> FusionOracle:
    return FusionOracle(read_features(feature_file), read_weights(weights_file), N)


class FlippedOracle(FrameClassifier):
    """Wraps a classifier and sends the search the wrong way on chosen calls.

    ``flip_calls`` are 0-based probe counts. On those calls the answer is
    replaced by a one-hot vector for the class that reverses the search
    direction for ``boundary`` ("start" or "end"). The call counter makes
    this wrapper stateful; use one instance per search.
    """

    def __init__(self, base: FrameClassifier, flip_calls, boundary: str):
        if boundary not in ("start", "end"):
            raise ValueError(f"boundary must be 'start' or 'end', got {boundary!r}")
        self.base = base
        self.flip_calls = frozenset(flip_calls)
        self.boundary = boundary
        self.context_radius = base.context_radius
        self.calls = 0

    def classify(self, t: int, video_length: int) -> ConfidenceVector:
        p = self.base.classify(t, video_length)
        k, self.calls = self.calls, self.calls + 1
        if k not in self.flip_calls:
            return p
        c = int(argmax_class(p))
        if self.boundary == "end":
            wrong = 3 if c <= 2 else 2
        else:
            wrong = 2 if c == 1 else 1
        return one_vs_rest(wrong, 1.0)


def _check_length(video_length: int, T: int) -> None:
    if video_length != T:
        raise ValidationError(f"classifier covers {T} frames, probe assumed {video_length}")
