"""How each saliency metric reacts to common failure modes of a prediction.

Run: python3 demos/metrics_walkthrough.py
"""
import numpy as np
from scipy import ndimage as ndi

from udcnet import data as D
from udcnet import metrics as M

gt = D.synth_sample(7, 96).sal_gt[0]
rng = np.random.default_rng(0)

cases = {
    "perfect": gt.copy(),
    "blurred": ndi.gaussian_filter(gt, 3),
    "shifted 6px": np.roll(gt, 6, axis=1),
    "eroded": ndi.binary_erosion(gt, iterations=4).astype(float),
    "noisy": np.clip(gt + rng.normal(0, 0.3, gt.shape), 0, 1),
    "all zero": np.zeros_like(gt),
}

keys = ["mae", "f_max", "f_adaptive", "f_weighted", "s_measure", "e_measure"]
print(f"{'case':12s}" + "".join(f"{k:>11s}" for k in keys))
for name, pred in cases.items():
    r = M.evaluate_pair(pred, gt)
    print(f"{name:12s}" + "".join(f"{getattr(r, k):11.4f}" for k in keys))
