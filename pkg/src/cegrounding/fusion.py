"""Inference for the transformer fusion classifier.

A window of ``2N+1`` frame features goes through eight self-attention heads
(no positional encoding), the concatenated head outputs are compressed by an
affine layer and a two-layer residual block, and the fused features of the
whole window are flattened into a two-layer head that yields the confidences
of the centre frame. Both two-layer blocks use a ReLU between their layers.

Weights are loaded from a plain-text tensor file::

    tensor <name> <rank> <d1> ... <dk>
    <row-major decimals, any whitespace>

Tensor names, with ``h`` in ``0..7``, ``m`` the feature size and ``m % 8 == 0``:

====================================  ===========================
``attn.{h}.{query,key,value}.weight``  ``(m/8, m)``
``attn.{h}.{query,key,value}.bias``    ``(m/8,)``
``compress.weight`` / ``.bias``        ``(c, m)`` / ``(c,)``
``residual.0.weight`` / ``.bias``      ``(r, c)`` / ``(r,)``
``residual.1.weight`` / ``.bias``      ``(c, r)`` / ``(c,)``
``head.0.weight`` / ``.bias``          ``(h0, (2N+1)*c)`` / ``(h0,)``
``head.1.weight`` / ``.bias``          ``(3, h0)`` / ``(3,)``
``linear.weight`` / ``.bias``          ``(3, m)`` / ``(3,)``, optional
====================================  ===========================
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import ConfidenceVector, GiClass, ValidationError, validate_confidence

NUM_HEADS = 8
PROB_FLOOR = 1e-12

_NAME_RE = re.compile(
    r"^(attn\.[0-7]\.(query|key|value)|compress|residual\.[01]|head\.[01]|linear)\.(weight|bias)$"
)


class WeightsError(ValidationError):
    pass


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def _sorted_sum(terms: np.ndarray, axis: int) -> np.ndarray:
    # summing in value order makes the result independent of frame order,
    # so permuting the window permutes the output bit for bit
    return np.sort(terms, axis=axis).sum(axis=axis)


def _rowwise(x: np.ndarray, W: np.ndarray, b: np.ndarray | float = 0.0) -> np.ndarray:
    # x @ W.T + b without BLAS: each row is reduced on its own, so the
    # result for a frame does not depend on where it sits in the window
    return (x[:, None, :] * W[None, :, :]).sum(axis=-1) + b


def attention_scores(q: Sequence[Sequence[float]], k: Sequence[Sequence[float]], m: int | None = None) -> np.ndarray:
    """Row-softmaxed scaled dot products ``q_i . k_j / sqrt(m)``.

    ``m`` defaults to the length of the query vectors.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    k = np.atleast_2d(np.asarray(k, dtype=float))
    if q.shape != k.shape:
        raise ValidationError(f"query shape {q.shape} does not match key shape {k.shape}")
    if m is None:
        m = q.shape[1]
    elif q.shape[1] != m:
        raise ValidationError(f"vectors have dimension {q.shape[1]}, expected {m}")
    scores = _rowwise(q, k) / math.sqrt(m)
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    return e / _sorted_sum(e, axis=1)[:, None]


@dataclass(frozen=True)
class FusionWeights:
    tensors: Mapping[str, np.ndarray]

    def __post_init__(self):
        self.validate()

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    @property
    def feature_dim(self) -> int:
        return self.tensors["attn.0.query.weight"].shape[1]

    @property
    def window(self) -> int:
        """Window length ``2N+1`` implied by the head's input width."""
        return self.tensors["head.0.weight"].shape[1] // self.tensors["compress.weight"].shape[0]

    @property
    def context_radius(self) -> int:
        return (self.window - 1) // 2

    def validate(self) -> None:
        t = self.tensors
        for name in t:
            if not _NAME_RE.match(name):
                raise WeightsError(f"unknown tensor {name!r}")
        required = [f"attn.{h}.{kind}.{part}" for h in range(NUM_HEADS)
                    for kind in ("query", "key", "value") for part in ("weight", "bias")]
        required += [f"{layer}.{part}" for layer in ("compress", "residual.0", "residual.1", "head.0", "head.1")
                     for part in ("weight", "bias")]
        for name in required:
            if name not in t:
                raise WeightsError(f"missing tensor {name!r}")

        def expect(name, shape):
            if t[name].shape != shape:
                raise WeightsError(f"tensor {name!r} has shape {t[name].shape}, expected {shape}")

        m = t["attn.0.query.weight"].shape[1] if t["attn.0.query.weight"].ndim == 2 else -1
        if m <= 0 or m % NUM_HEADS:
            raise WeightsError(f"tensor 'attn.0.query.weight' implies feature size {m}, not a positive multiple of 8")
        dh = m // NUM_HEADS
        for h in range(NUM_HEADS):
            for kind in ("query", "key", "value"):
                expect(f"attn.{h}.{kind}.weight", (dh, m))
                expect(f"attn.{h}.{kind}.bias", (dh,))
        c = t["compress.weight"].shape[0]
        expect("compress.weight", (c, m))
        expect("compress.bias", (c,))
        r = t["residual.0.weight"].shape[0]
        expect("residual.0.weight", (r, c))
        expect("residual.0.bias", (r,))
        expect("residual.1.weight", (c, r))
        expect("residual.1.bias", (c,))
        h0, width = t["head.0.weight"].shape
        if width % c or (width // c) % 2 == 0:
            raise WeightsError(f"tensor 'head.0.weight' input width {width} is not an odd multiple of {c}")
        expect("head.0.bias", (h0,))
        expect("head.1.weight", (3, h0))
        expect("head.1.bias", (3,))
        if "linear.weight" in t or "linear.bias" in t:
            expect("linear.weight", (3, m))
            expect("linear.bias", (3,))


def fused_features(features: np.ndarray, w: FusionWeights) -> tuple[np.ndarray, list[np.ndarray]]:
    """Per-frame fused features and the attention matrix of every head."""
    x = np.asarray(features, dtype=float)
    heads, attn = [], []
    for h in range(NUM_HEADS):
        q = _rowwise(x, w[f"attn.{h}.query.weight"], w[f"attn.{h}.query.bias"])
        k = _rowwise(x, w[f"attn.{h}.key.weight"], w[f"attn.{h}.key.bias"])
        v = _rowwise(x, w[f"attn.{h}.value.weight"], w[f"attn.{h}.value.bias"])
        A = attention_scores(q, k)
        attn.append(A)
        heads.append(_sorted_sum(A[:, :, None] * v[None, :, :], axis=1))
    z = _rowwise(np.concatenate(heads, axis=1), w["compress.weight"], w["compress.bias"])
    hidden = np.maximum(_rowwise(z, w["residual.0.weight"], w["residual.0.bias"]), 0.0)
    z = z + _rowwise(hidden, w["residual.1.weight"], w["residual.1.bias"])
    return z, attn


def fuse_window(features: Sequence[Sequence[float]], w: FusionWeights) -> ConfidenceVector:
    """Confidences for the centre frame of a ``2N+1`` feature window."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[0] != w.window:
        raise ValidationError(f"features have shape {x.shape}, expected ({w.window}, {w.feature_dim})")
    if x.shape[1] != w.feature_dim:
        raise WeightsError(
            f"tensor 'attn.0.query.weight' expects feature size {w.feature_dim}, features have {x.shape[1]}"
        )
    if not np.all(np.isfinite(x)):
        raise ValidationError("features contain non-finite values")
    z, _ = fused_features(x, w)
    hidden = np.maximum(w["head.0.weight"] @ z.reshape(-1) + w["head.0.bias"], 0.0)
    return validate_confidence(softmax(w["head.1.weight"] @ hidden + w["head.1.bias"]))


def linear_head(f: Sequence[float], weight: np.ndarray, bias: np.ndarray) -> ConfidenceVector:
    """Single-frame classifier: ``softmax(W f + b)``."""
    f = np.asarray(f, dtype=float)
    weight = np.asarray(weight, dtype=float)
    bias = np.asarray(bias, dtype=float)
    if weight.shape != (3, f.shape[0]) or bias.shape != (3,):
        raise ValidationError(f"linear layer {weight.shape}/{bias.shape} does not fit feature size {f.shape[0]}")
    return validate_confidence(softmax(weight @ f + bias))


def cross_entropy(p: ConfidenceVector, y: GiClass | int) -> float:
    return -math.log(max(p[int(y)], PROB_FLOOR))


# --- text formats -------------------------------------------------------------

def read_weights(path: str | Path) -> FusionWeights:
    tokens = Path(path).read_text().split()
    tensors: dict[str, np.ndarray] = {}
    i = 0
    while i < len(tokens):
        if tokens[i] != "tensor":
            raise WeightsError(f"{path}: expected 'tensor' header, found {tokens[i]!r}")
        try:
            name, rank = tokens[i + 1], int(tokens[i + 2])
            shape = tuple(int(s) for s in tokens[i + 3:i + 3 + rank])
        except (IndexError, ValueError) as exc:
            raise WeightsError(f"{path}: malformed tensor header near token {i}") from exc
        if len(shape) != rank:
            raise WeightsError(f"{path}: truncated header for tensor {name!r}")
        if not _NAME_RE.match(name):
            raise WeightsError(f"{path}: unknown tensor {name!r}")
        if name in tensors:
            raise WeightsError(f"{path}: duplicate tensor {name!r}")
        size = int(np.prod(shape)) if shape else 1
        start = i + 3 + rank
        data = tokens[start:start + size]
        if len(data) != size:
            raise WeightsError(f"{path}: tensor {name!r} needs {size} values, found {len(data)}")
        tensors[name] = np.array([float(v) for v in data]).reshape(shape)
        i = start + size
    return FusionWeights(tensors)


def write_weights(w: FusionWeights | Mapping[str, np.ndarray], path: str | Path) -> None:
    tensors = w.tensors if isinstance(w, FusionWeights) else w
    lines = []
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype=float)
        lines.append(f"tensor {name} {arr.ndim} " + " ".join(str(s) for s in arr.shape))
        flat = arr.reshape(-1)
        row = max(arr.shape[-1], 1) if arr.ndim else 1
        for j in range(0, flat.size, row):
            lines.append(" ".join(repr(float(v)) for v in flat[j:j + row]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_features(path: str | Path) -> np.ndarray:
    """Load ``<frame_index> <m decimals>`` records into a ``(T, m)`` array (row 0 = frame 1)."""
    rows: dict[int, list[float]] = {}
    width = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        try:
            idx = int(parts[0])
            vals = [float(v) for v in parts[1:]]
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: malformed feature record") from exc
        if width is None:
            width = len(vals)
        if len(vals) != width or width == 0:
            raise ValidationError(f"{path}:{lineno}: frame {idx} has {len(vals)} features, expected {width}")
        if idx in rows:
            raise ValidationError(f"{path}:{lineno}: duplicate frame {idx}")
        rows[idx] = vals
    if not rows:
        raise ValidationError(f"{path}: no feature records")
    T = len(rows)
    for t in range(1, T + 1):
        if t not in rows:
            raise ValidationError(f"{path}: missing frame {t}")
    return np.array([rows[t] for t in range(1, T + 1)])


def write_features(features: np.ndarray, path: str | Path) -> None:
    with open(path, "w") as fh:
        for t, row in enumerate(np.asarray(features, dtype=float), start=1):
            fh.write(f"{t} " + " ".join(repr(float(v)) for v in row) + "\n")


def random_weights(m: int, N: int, rng: np.random.Generator, compress: int | None = None,
                   residual: int | None = None, head: int = 16, scale: float = 0.5) -> FusionWeights:
    """Gaussian weights of consistent shape, for tests and demos."""
    c = compress or m
    r = residual or c
    dh = m // NUM_HEADS
    shapes = {}
    for h in range(NUM_HEADS):
        for kind in ("query", "key", "value"):
            shapes[f"attn.{h}.{kind}.weight"] = (dh, m)
            shapes[f"attn.{h}.{kind}.bias"] = (dh,)
    shapes.update({
        "compress.weight": (c, m), "compress.bias": (c,),
        "residual.0.weight": (r, c), "residual.0.bias": (r,),
        "residual.1.weight": (c, r), "residual.1.bias": (c,),
        "head.0.weight": (head, (2 * N + 1) * c), "head.0.bias": (head,),
        "head.1.weight": (3, head), "head.1.bias": (3,),
        "linear.weight": (3, m), "linear.bias": (3,),
    })
    return FusionWeights({k: scale * rng.standard_normal(s) for k, s in shapes.items()})
