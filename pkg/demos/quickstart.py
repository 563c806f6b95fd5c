"""Overfit the toy model on a handful of synthetic scenes, then score it.

Run: python3 demos/quickstart.py  (a few minutes on one CPU core)
"""
import logging

from udcnet import config as C
from udcnet import data as D
from udcnet import engine
from udcnet import metrics as M

logging.basicConfig(level=logging.INFO, format="%(message)s")

cfg = C.toy_profile()
cfg.train.augment = False
cfg.train.lr = 1e-3
cfg.train.max_steps = 300
# four samples at batch 4 make every step an epoch, so keep the step decay out of the way
cfg.train.epochs = 10_000
cfg.train.decay_every = 10_000
cfg.train.log_every = 50

samples = D.synth_dataset(4, cfg.model.image_size, seed=0)
print("foreground fractions:", [round(float(s.sal_gt.mean()), 3) for s in samples])

model, state = engine.fit(cfg, samples)
reports = engine.evaluate_samples(model, samples, cfg.model.image_size)
agg = M.aggregate(reports)
print(f"after {state.step} steps:")
for k, v in agg.scalars().items():
    print(f"  {k:11s} {v:.4f}")
