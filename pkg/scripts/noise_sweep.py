"""Mean IoU and boundary errors across confusion presets and per-frame confidence.

    python scripts/noise_sweep.py --trials 200 --frames 125100
"""
import argparse

from cegrounding.experiments import ExperimentConfig, simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--frames", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    print("matrix      model  conf  iou_mean  start_med  start_mean  end_med  end_mean  scan_iou")
    for matrix in ("resnet", "resnet-tfe"):
        for model in ("fixed", "beta"):
            for conf in (0.55, 0.7, 0.9, 1.0):
                if model == "beta" and conf == 1.0:
                    continue
                cfg = ExperimentConfig(frames=args.frames, oracle="noisy", matrix=matrix, confidence=conf,
                                       confidence_model=model, trials=args.trials, seed=args.seed,
                                       with_scan=True)
                s = simulate(cfg, workers=args.workers)
                sd, ed = s["start_deviation"], s["end_deviation"]
                print(f"{matrix:<11} {model:<6} {conf:4.2f}  {s['iou_mean']:.4f}  {sd['median']:9.1f}"
                      f"  {sd['mean']:10.1f}  {ed['median']:7.1f}  {ed['mean']:8.1f}  {s['scan_iou_mean']:.4f}")


if __name__ == "__main__":
    main()
