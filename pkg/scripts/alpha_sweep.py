"""Worst-case error after a single flipped answer, as a function of the decay factor.

Values at or below 0.5 lose the ability to recover from one wrong step.
"""
import argparse

from cegrounding.oracles import FlippedOracle, PerfectOracle, VideoLayout
from cegrounding.search import SearchConfig, probe_budget, search_end


def worst_error(T, alpha, flips):
    cfg = SearchConfig(alpha=alpha, unchecked=True)
    worst = 0
    for k in flips:
        for b in range(2, T, max(1, T // 400)):
            got, _ = search_end(FlippedOracle(PerfectOracle(VideoLayout(T, 1, b)), {k}, "end"), T, cfg)
            worst = max(worst, abs(got - b))
    return worst


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=1000)
    ap.add_argument("--flip-iterations", type=int, default=6)
    args = ap.parse_args()
    print("alpha  probes  worst_error")
    for alpha in (0.3, 0.4, 0.45, 0.5, 0.55, 0.6, 0.7, 0.8, 0.9, 0.95):
        err = worst_error(args.frames, alpha, range(args.flip_iterations))
        print(f"{alpha:5.2f}  {probe_budget(args.frames, alpha):6d}  {err:11d}")


if __name__ == "__main__":
    main()
