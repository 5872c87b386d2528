"""Seeded experiment runners shared by the CLI and the scripts."""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import FrameClassifier, ValidationError
from .metrics import GroundingResult, deviation_summary, mean_ci95, segment_iou
from .oracles import (
    PAPER_PROPORTIONS,
    PRESETS,
    ConfusionMatrix,
    FileOracle,
    FusionOracle,
    NoisyOracle,
    NoisyOracleConfig,
    PerfectOracle,
    VideoLayout,
    generate_layout,
    read_confidences,
    read_layout,
    read_confusion,
)
from .fusion import read_features, read_weights
from .search import SearchConfig, ground_small_intestine, scan_baseline


@dataclass
class ExperimentConfig:
    frames: int = 10_000
    proportions: tuple = PAPER_PROPORTIONS
    jitter: float = 0.1
    oracle: str = "perfect"  # perfect | noisy | file | fusion
    matrix: str = "resnet-tfe"  # preset name or path to a 3x3 text file
    confidence: Optional[float] = None  # perfect: 1.0, noisy: 0.9
    confidence_model: str = "fixed"
    concentration: float = 20.0
    alpha: float = 0.9
    theta: float = 0.5
    epsilon: float = 0.01
    initial_fraction: float = 0.5
    stride_alpha: bool = False
    context: int = 6
    trials: int = 1
    seed: int = 0
    with_scan: bool = False
    layout: Optional[str] = None
    confidences: Optional[str] = None
    features: Optional[str] = None
    weights: Optional[str] = None

    def search_config(self) -> SearchConfig:
        return SearchConfig(self.alpha, self.theta, self.epsilon, self.initial_fraction, self.stride_alpha)

    def resolved_confidence(self) -> float:
        if self.confidence is not None:
            return self.confidence
        return 0.9 if self.oracle == "noisy" else 1.0

    def confusion(self) -> ConfusionMatrix:
        if self.matrix in PRESETS:
            return PRESETS[self.matrix]
        return read_confusion(self.matrix)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["proportions"] = list(self.proportions)
        d["confidence"] = self.resolved_confidence()
        return d

    def make_layout(self, seed: int) -> Optional[VideoLayout]:
        if self.layout is not None:
            return read_layout(self.layout)
        if self.oracle in ("file", "fusion"):
            return None
        return generate_layout(self.frames, self.proportions, seed, self.jitter)

    def make_oracle(self, layout: Optional[VideoLayout], seed: int) -> tuple[FrameClassifier, int]:
        """Classifier for one trial and the video length it covers."""
        if self.oracle == "perfect":
            return PerfectOracle(layout, self.resolved_confidence()), layout.T
        if self.oracle == "noisy":
            cfg = NoisyOracleConfig(self.confusion(), self.resolved_confidence(),
                                    self.confidence_model, self.concentration, seed)
            return NoisyOracle(layout, cfg), layout.T
        if self.oracle == "file":
            if not self.confidences:
                raise ValidationError("--oracle file needs --confidences")
            o = FileOracle(read_confidences(self.confidences))
            return o, o.T
        if self.oracle == "fusion":
            if not (self.features and self.weights):
                raise ValidationError("--oracle fusion needs --features and --weights")
            o = FusionOracle(read_features(self.features), read_weights(self.weights), self.context)
            return o, o.T
        raise ValidationError(f"unknown oracle kind {self.oracle!r}")


def run_trial(cfg: ExperimentConfig, index: int = 0) -> dict:
    """Ground one video; trial ``i`` uses seed ``cfg.seed + i`` for layout and noise."""
    seed = cfg.seed + index
    layout = cfg.make_layout(seed)
    oracle, T = cfg.make_oracle(layout, seed)
    if layout is not None and layout.T != T:
        raise ValidationError(f"layout covers {layout.T} frames but the classifier covers {T}")
    g = ground_small_intestine(oracle, T, cfg.search_config())
    out = {
        "trial": index,
        "seed": seed,
        "T": T,
        "segment": [g.segment.start, g.segment.end],
        "swapped": g.swapped,
        "flagged": g.flagged,
        "oracle_calls": g.oracle_calls,
        "start_trace": g.start_trace.as_dict(),
        "end_trace": g.end_trace.as_dict(),
    }
    if layout is not None:
        r = GroundingResult(g.segment, layout.segment, g.oracle_calls)
        out.update(truth=[layout.t_s, layout.t_e], iou=r.iou, start_error=r.start_error, end_error=r.end_error)
    if cfg.with_scan:
        s = scan_baseline(oracle, T)
        out["scan"] = {
            "found": s.found,
            "segment": [s.segment.start, s.segment.end] if s.found else None,
            "oracle_calls": s.oracle_calls,
        }
        if layout is not None:
            out["scan"]["iou"] = segment_iou(s.segment, layout.segment) if s.found else 0.0
    return out


def _run_trial_args(args):
    return run_trial(*args)


def simulate(cfg: ExperimentConfig, workers: int = 1) -> dict:
    """Monte-Carlo grounding over ``cfg.trials`` seeded videos."""
    if cfg.trials < 1:
        raise ValidationError(f"trials must be at least 1, got {cfg.trials}")
    jobs = [(cfg, i) for i in range(cfg.trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            trials = list(pool.map(_run_trial_args, jobs, chunksize=8))
    else:
        trials = [run_trial(*j) for j in jobs]
    return summarize(trials)


def summarize(trials: list[dict]) -> dict:
    calls = np.array([t["oracle_calls"] for t in trials], dtype=float)
    summary = {
        "trials": len(trials),
        "oracle_calls_mean": float(calls.mean()),
        "oracle_calls_max": int(calls.max()),
        "flagged": int(sum(t["flagged"] for t in trials)),
    }
    if all("iou" in t for t in trials):
        iou = [t["iou"] for t in trials]
        mean, lo, hi = mean_ci95(iou)
        q1, med, q3 = np.percentile(iou, [25, 50, 75])
        summary.update(
            iou_mean=mean, iou_ci95=[lo, hi], iou_std=float(np.std(iou, ddof=1)) if len(iou) > 1 else 0.0,
            iou_quartiles=[float(q1), float(med), float(q3)],
            start_deviation=deviation_summary([t["start_error"] for t in trials]).as_dict(),
            end_deviation=deviation_summary([t["end_error"] for t in trials]).as_dict(),
        )
    if all("scan" in t and "iou" in t["scan"] for t in trials):
        summary["scan_iou_mean"] = float(np.mean([t["scan"]["iou"] for t in trials]))
        summary["scan_oracle_calls_mean"] = float(np.mean([t["scan"]["oracle_calls"] for t in trials]))
    per_trial = []
    for t in trials:
        row = {k: t[k] for k in ("trial", "seed", "segment", "oracle_calls", "flagged")}
        for k in ("truth", "iou", "start_error", "end_error"):
            if k in t:
                row[k] = t[k]
        if "scan" in t:
            row["scan"] = t["scan"]
        per_trial.append(row)
    summary["per_trial"] = per_trial
    return summary


def write_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
