"""Recompute the frozen constants in tests/_golden.py.

E_MAX / E_FLIP / probe counts come from the scratch walk in tests/_reference.py,
which does not import the package; the Monte-Carlo means come from the package.
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

import _reference as ref  # noqa: E402
from cegrounding.experiments import ExperimentConfig, simulate  # noqa: E402

print(f"E_MAX = {ref.perfect_max_error()}")
print(f"E_FLIP = {ref.flip_max_error()}")
print(f"# alpha=0.45 with one flip: {ref.flip_max_error(alpha=0.45)}")
print(f"PROBES_PAPER_LENGTH = {ref.count_probes(125_100)}")
for name, preset in (("RESNET_TFE", "resnet-tfe"), ("RESNET", "resnet")):
    s = simulate(ExperimentConfig(oracle="noisy", matrix=preset, trials=200, seed=0))
    print(f"MEAN_IOU_{name} = {s['iou_mean']!r}")
