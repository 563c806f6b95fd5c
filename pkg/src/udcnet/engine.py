"""Training, evaluation and inference loops used by the CLI."""
import json
import logging
import random
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import List, Optional

import numpy as np
import torch
from PIL import Image
from torch.utils.data import DataLoader

from . import config as C
from . import data as D
from . import metrics as M
from .losses import total_loss
from .model import UDCNet, load_checkpoint, save_checkpoint

log = logging.getLogger("udcnet")


def seed_everything(seed):
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def lr_at_epoch(cfg: C.TrainConfig, epoch):
    return cfg.lr * cfg.lr_decay ** (epoch // cfg.decay_every)


def resolve_splits(cfg: C.RunConfig):
    """(train items, val items) from ``cfg.dataset_root``.

    Uses ``<root>/val`` when present, else holds out 10% of the training pairs.
    """
    if not cfg.dataset_root:
        raise C.ConfigError("dataset_root is not set")
    manifest = D.load_manifest(cfg.dataset_root, cfg.train_split)
    if (Path(cfg.dataset_root) / "val").is_dir():
        return manifest.pairs, D.load_manifest(cfg.dataset_root, "val").pairs
    train_stems, val_stems = D.holdout_split(manifest.stems)
    by_stem = dict(zip(manifest.stems, manifest.pairs))
    return [by_stem[s] for s in train_stems], [by_stem[s] for s in val_stems]


@torch.no_grad()
def predict(model: UDCNet, image: torch.Tensor, size=None):
    """(saliency, edge) probabilities for a normalized batch, resized to ``size``."""
    model.eval()
    out = model(image)
    size = size or image.shape[-2:]
    sal = out.prediction(size)
    edge = torch.sigmoid(torch.nn.functional.interpolate(out.edge_logits[2], size=size, mode="bilinear", align_corners=False))
    return sal, edge


def evaluate_samples(model: UDCNet, samples, image_size, normalize=True) -> List[M.MetricReport]:
    """Per-image reports; predictions are resized back to each mask's resolution."""
    reports = []
    for s in samples:
        if not isinstance(s, D.Sample):
            s = D.load_sample(*s)
        image, _, _ = D.resize_normalize(s, image_size)
        sal, _ = predict(model, image[None], s.sal_gt.shape[-2:])
        reports.append(M.evaluate_pair(sal[0, 0].numpy(), s.sal_gt[0], normalize=normalize))
    return reports


def mean_mae(model, samples, image_size):
    return float(np.mean([r.mae for r in evaluate_samples(model, samples, image_size, normalize=False)]))


@dataclass
class TrainState:
    epoch: int = 0
    step: int = 0
    batch_in_epoch: int = 0
    best_mae: float = float("inf")
    history: list = field(default_factory=list)


def _save(path, model, optimizer, scheduler, state: TrainState, run_cfg):
    save_checkpoint(path, model, {
        "optimizer": optimizer.state_dict(),
        "scheduler": scheduler.state_dict(),
        "state": {k: v for k, v in vars(state).items() if k != "history"},
        "run_config": C.to_dict(run_cfg),
    })


def fit(cfg: C.RunConfig, train_items, val_items=None, output_dir=None, resume=None, on_step=None):
    """Train and return (model, TrainState).

    ``train_items`` / ``val_items`` are manifest pairs or in-memory samples.
    Checkpoints ``last.pt`` (every epoch) and ``best.pt`` (lowest validation
    MAE) go to ``output_dir`` when given. ``on_step(state, breakdown, model)`` runs
    after every optimizer step; a truthy return value stops training.
    """
    cfg.validate()
    tc = cfg.train
    if not train_items:
        raise ValueError("training set is empty")
    out = Path(output_dir) if output_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(C.dump_config(cfg))

    seed_everything(cfg.seed)
    model = UDCNet(cfg.model)
    optimizer = torch.optim.Adam(model.parameters(), lr=tc.lr)
    scheduler = torch.optim.lr_scheduler.StepLR(optimizer, step_size=tc.decay_every, gamma=tc.lr_decay)
    state = TrainState()
    if resume:
        model, extra = load_checkpoint(resume, cfg.model)
        optimizer = torch.optim.Adam(model.parameters(), lr=tc.lr)
        scheduler = torch.optim.lr_scheduler.StepLR(optimizer, step_size=tc.decay_every, gamma=tc.lr_decay)
        optimizer.load_state_dict(extra["optimizer"])
        scheduler.load_state_dict(extra["scheduler"])
        state = TrainState(**extra["state"])
        log.info("resumed from %s at epoch %d step %d", resume, state.epoch, state.step)

    dataset = D.SODDataset(train_items, cfg.model.image_size, augment=tc.augment, seed=cfg.seed)
    done = False
    while state.epoch < tc.epochs and not done:
        dataset.set_epoch(state.epoch)
        gen = torch.Generator().manual_seed(cfg.seed * 100003 + state.epoch)
        loader = DataLoader(dataset, batch_size=tc.batch_size, shuffle=True, generator=gen,
                            num_workers=tc.num_workers, drop_last=False)
        model.train()
        t0 = time.time()
        for i, batch in enumerate(loader):
            if i < state.batch_in_epoch:
                continue  # already consumed before a mid-epoch resume
            breakdown = total_loss(model(batch["image"]), batch["sal_gt"], batch["edge_gt"], tc.loss_window)
            optimizer.zero_grad(set_to_none=True)
            breakdown.total.backward()
            optimizer.step()
            state.step += 1
            state.batch_in_epoch = i + 1
            loss = breakdown.total.item()
            state.history.append(loss)
            if state.step % tc.log_every == 0 or state.step == 1:
                parts = " ".join(f"{k}={v:.4f}" for k, v in breakdown.as_floats().items() if k != "total")
                log.info("step=%d epoch=%d lr=%.3g loss=%.5f %s", state.step, state.epoch,
                         optimizer.param_groups[0]["lr"], loss, parts)
            stop = bool(on_step(state, breakdown, model)) if on_step else False
            if stop or (tc.max_steps and state.step >= tc.max_steps):
                done = True
                break
        if state.batch_in_epoch >= len(loader):
            scheduler.step()
            state.epoch += 1
            state.batch_in_epoch = 0
        log.debug("epoch took %.1fs", time.time() - t0)
        if val_items:
            val_mae = mean_mae(model, val_items, cfg.model.image_size)
            log.info("epoch=%d val_mae=%.5f", state.epoch, val_mae)
            if val_mae < state.best_mae and out:
                state.best_mae = val_mae
                _save(out / "best.pt", model, optimizer, scheduler, state, cfg)
            state.best_mae = min(state.best_mae, val_mae)
        if out:
            _save(out / "last.pt", model, optimizer, scheduler, state, cfg)
    return model, state


def write_report(reports: List[M.MetricReport], ids, out_dir, name="report"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    agg = M.aggregate(reports)
    blob = {
        "aggregate": agg.scalars(),
        "n_images": agg.n_images,
        "per_image": {i: r.scalars() for i, r in zip(ids, reports)},
        "curves": {"threshold": M.THRESHOLDS.tolist(), "precision": agg.precision,
                   "recall": agg.recall, "f": agg.f_curve},
    }
    (out / f"{name}.json").write_text(json.dumps(blob, indent=2) + "\n")
    agg.write_curves_csv(out / f"{name}_curves.csv")
    return agg


def export_curves(report_path, csv_path):
    blob = json.loads(Path(report_path).read_text())
    c = blob["curves"]
    report = M.MetricReport(**blob["aggregate"], precision=c["precision"], recall=c["recall"], f_curve=c["f"])
    report.write_curves_csv(csv_path)
    return csv_path


def infer_dir(model: UDCNet, image_dir, out_dir, image_size):
    """Write 8-bit saliency and edge maps named after the input stems."""
    image_dir, out = Path(image_dir), Path(out_dir)
    paths = sorted(p for p in image_dir.iterdir() if p.suffix.lower() in D.IMAGE_EXTS)
    if not paths:
        raise FileNotFoundError(f"no images found in {image_dir}")
    (out / "saliency").mkdir(parents=True, exist_ok=True)
    (out / "edge").mkdir(parents=True, exist_ok=True)
    for path in paths:
        rgb = np.asarray(Image.open(path).convert("RGB"), dtype=np.float32) / 255.0
        h, w = rgb.shape[:2]
        blank = np.zeros((1, h, w), np.float32)
        sample = D.Sample(rgb.transpose(2, 0, 1).copy(), blank, blank, path.stem)
        image, _, _ = D.resize_normalize(sample, image_size)
        sal, edge = predict(model, image[None], (h, w))
        for kind, prob in (("saliency", sal), ("edge", edge)):
            arr = M.minmax_normalize(prob[0, 0].numpy())
            Image.fromarray(np.round(arr * 255).astype(np.uint8)).save(out / kind / f"{path.stem}.png")
    return len(paths)


def reference_rows(dataset: Optional[str] = None):
    blob = json.loads(resources.files("udcnet").joinpath("reference_results.json").read_text())
    rows = blob["rows"]
    if dataset is not None:
        match = {k.lower(): k for k in rows}
        if dataset.lower() not in match:
            raise KeyError(f"unknown dataset {dataset!r}; known: {', '.join(sorted(rows))}")
        rows = {match[dataset.lower()]: rows[match[dataset.lower()]]}
    return blob["label"], blob["metrics"], rows
