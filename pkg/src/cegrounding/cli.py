"""Command-line harness: ``cegrounding <subcommand> ...``.

Every subcommand prints ``key=value`` lines and, with ``--report``, writes a
JSON report that embeds the resolved configuration. Reports contain no
timestamps or timings, so a rerun with the same seed is byte-identical.

Exit codes: 0 success, 1 invalid input, 2 flagged (degenerate) segment.
"""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .core import Segment, ValidationError
from .experiments import ExperimentConfig, run_trial, simulate, write_report
from .fusion import read_features, read_weights
from .metrics import (
    GroundingResult,
    class_counts,
    confusion_counts,
    micro_macro_accuracy,
)
from .oracles import (
    FusionOracle,
    NoisyOracle,
    NoisyOracleConfig,
    PerfectOracle,
    generate_layout,
    read_confidences,
    read_layout,
    write_confidences,
    write_layout,
)
from .search import SearchError

EXIT_FLAGGED = 2


def _proportions(text: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad proportions {text!r}")
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("need three comma-separated proportions")
    return vals


def _add_video(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("video")
    g.add_argument("--frames", type=int, default=10_000)
    g.add_argument("--proportions", type=_proportions, default=(0.072, 0.449, 0.479))
    g.add_argument("--jitter", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--layout", help="ground-truth layout file 'T t_s t_e'")


def _add_oracle(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("oracle")
    g.add_argument("--oracle", choices=["perfect", "noisy", "file", "fusion"], default="perfect")
    g.add_argument("--matrix", default="resnet-tfe", help="resnet, resnet-tfe, or a 3x3 text file")
    g.add_argument("--confidence", type=float, default=None)
    g.add_argument("--confidence-model", choices=["fixed", "beta"], default="fixed")
    g.add_argument("--concentration", type=float, default=20.0)
    g.add_argument("--confidences", help="CSV of per-frame confidences (--oracle file)")
    g.add_argument("--features", help="feature file (--oracle fusion)")
    g.add_argument("--weights", help="weights file (--oracle fusion)")
    g.add_argument("--context", type=int, default=6, help="window radius N")


def _add_search(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("search")
    g.add_argument("--alpha", type=float, default=0.9)
    g.add_argument("--theta", type=float, default=0.5)
    g.add_argument("--epsilon", type=float, default=0.01)
    g.add_argument("--initial-fraction", type=float, default=0.5)
    g.add_argument("--stride-alpha", action="store_true", help="scale the stride by alpha as well")


def _config(args: argparse.Namespace, **overrides) -> ExperimentConfig:
    names = ExperimentConfig.__dataclass_fields__
    kw = {k: v for k, v in vars(args).items() if k in names}
    kw.update(overrides)
    return ExperimentConfig(**kw)


def _emit(report: dict, args: argparse.Namespace, keys: Sequence[str], source: Optional[dict] = None) -> None:
    src = report["results"] if source is None else source
    print(f"command={report['command']}")
    for k in keys:
        if k in src:
            v = src[k]
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            print(f"{k}={v}")
    if getattr(args, "report", None):
        write_report(report, args.report)


def cmd_generate(args) -> int:
    layout = generate_layout(args.frames, args.proportions, args.seed, args.jitter)
    write_layout(layout, args.layout_out)
    cfg = _config(args, trials=1)
    report = {"command": "generate", "config": cfg.as_dict(),
              "results": {"T": layout.T, "t_s": layout.t_s, "t_e": layout.t_e}}
    if args.confidences_out:
        if cfg.oracle == "perfect":
            oracle = PerfectOracle(layout, cfg.resolved_confidence())
        elif cfg.oracle == "noisy":
            oracle = NoisyOracle(layout, NoisyOracleConfig(cfg.confusion(), cfg.resolved_confidence(),
                                                           cfg.confidence_model, cfg.concentration, args.seed))
        else:
            raise ValidationError("generate can only write confidences for perfect or noisy oracles")
        write_confidences([oracle.classify(t, layout.T) for t in range(1, layout.T + 1)], args.confidences_out)
    _emit(report, args, ["T", "t_s", "t_e"])
    return 0


def cmd_search(args) -> int:
    cfg = _config(args, trials=1)
    trial = run_trial(cfg, 0)
    report = {"command": "search", "config": cfg.as_dict(), "results": trial}
    _emit(report, args, ["T", "segment", "truth", "iou", "start_error", "end_error", "oracle_calls", "flagged"])
    return EXIT_FLAGGED if trial["flagged"] else 0


def cmd_scan(args) -> int:
    cfg = _config(args, trials=1, with_scan=True)
    trial = run_trial(cfg, 0)
    scan = trial["scan"]
    results = {
        "T": trial["T"],
        "scan_found": scan["found"],
        "scan_segment": scan["segment"],
        "scan_oracle_calls": scan["oracle_calls"],
        "search_segment": trial["segment"],
        "search_oracle_calls": trial["oracle_calls"],
        "call_ratio": trial["oracle_calls"] / scan["oracle_calls"],
    }
    if "truth" in trial:
        results.update(truth=trial["truth"], scan_iou=scan["iou"], search_iou=trial["iou"])
    report = {"command": "scan", "config": cfg.as_dict(), "results": results}
    _emit(report, args, list(results))
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    summary = simulate(cfg, workers=args.workers)
    report = {"command": "simulate", "config": cfg.as_dict(), "results": summary}
    _emit(report, args, ["trials", "iou_mean", "iou_ci95", "iou_quartiles", "oracle_calls_mean",
                         "flagged", "scan_iou_mean"])
    for name in ("start_deviation", "end_deviation"):
        if name in summary:
            for k, v in summary[name].items():
                print(f"{name}.{k}={v}")
    return 0


def cmd_fuse(args) -> int:
    oracle = FusionOracle(read_features(args.features), read_weights(args.weights), args.context)
    T = oracle.T
    vectors = [oracle.classify(t, T) for t in range(1, T + 1)]
    write_confidences(vectors, args.out)
    report = {"command": "fuse",
              "config": {"features": args.features, "weights": args.weights, "context": args.context,
                         "out": args.out},
              "results": {"T": T, "out": args.out}}
    _emit(report, args, ["T", "out"])
    return 0


def cmd_eval(args) -> int:
    truth = read_layout(args.truth)
    results: dict = {"truth": [truth.t_s, truth.t_e]}
    if args.segment or args.prediction:
        if args.segment:
            pred = Segment(*args.segment)
        else:
            pred = read_layout(args.prediction).segment
        pred.check_within(truth.T)
        r = GroundingResult(pred, truth.segment)
        results.update(segment=[pred.start, pred.end], iou=r.iou,
                       start_error=r.start_error, end_error=r.end_error)
    if args.confidences:
        vectors = read_confidences(args.confidences)
        if len(vectors) != truth.T:
            raise ValidationError(f"confidences cover {len(vectors)} frames, layout has {truth.T}")
        pairs = [(p.predicted, truth.class_at(t)) for t, p in enumerate(vectors, start=1)]
        n, c = class_counts(pairs)
        micro, macro = micro_macro_accuracy(n, c)
        counts = confusion_counts([int(p) for p, _ in pairs], [int(y) for _, y in pairs])
        results.update(accuracy_micro=micro, accuracy_macro=macro, class_totals=n, class_correct=c,
                       confusion_counts=counts.tolist())
    report = {"command": "eval", "config": {"truth": args.truth, "segment": args.segment,
                                            "prediction": args.prediction, "confidences": args.confidences},
              "results": results}
    _emit(report, args, ["truth", "segment", "iou", "start_error", "end_error", "accuracy_micro",
                         "accuracy_macro"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cegrounding", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic layout and optional confidences")
    _add_video(p)
    _add_oracle(p)
    p.add_argument("--layout-out", required=True)
    p.add_argument("--confidences-out")
    p.add_argument("--report")
    p.set_defaults(func=cmd_generate)

    for name, func, helptext in (("search", cmd_search, "ground one video with the boundary search"),
                                 ("scan", cmd_scan, "classify every frame and compare with the search")):
        p = sub.add_parser(name, help=helptext)
        _add_video(p)
        _add_oracle(p)
        _add_search(p)
        p.add_argument("--report")
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", help="Monte-Carlo grounding over seeded videos")
    _add_video(p)
    _add_oracle(p)
    _add_search(p)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--with-scan", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fuse", help="run the fusion network over every frame")
    p.add_argument("--features", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--context", type=int, default=6)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="score a predicted segment and/or per-frame confidences")
    p.add_argument("--truth", required=True, help="layout file 'T t_s t_e'")
    p.add_argument("--segment", type=int, nargs=2, metavar=("START", "END"))
    p.add_argument("--prediction", help="predicted segment as a layout file")
    p.add_argument("--confidences")
    p.add_argument("--report")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, SearchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
