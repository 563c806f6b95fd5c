"""Saliency and edge losses plus the level-weighted training objective."""
from dataclasses import dataclass, field
from typing import Dict

import torch
import torch.nn.functional as F

from .layers import upsample_to

# level -> weight
SALIENCY_WEIGHTS = {2: 1.0, 3: 0.5, 4: 0.25, 5: 0.125}
EDGE_WEIGHTS = {2: 0.5, 3: 0.25, 4: 0.125, 5: 0.0625}
R6_WEIGHT = 1.0 / 16


def _check_gt(gt, name="gt"):
    if not torch.isfinite(gt).all() or gt.min() < 0 or gt.max() > 1:
        raise ValueError(f"{name} values must lie in [0, 1]")


def _match(logits, gt):
    if logits.shape[-2:] != gt.shape[-2:]:
        logits = upsample_to(logits, gt.shape[-2:])
    if logits.shape != gt.shape:
        raise ValueError(f"logits {tuple(logits.shape)} and gt {tuple(gt.shape)} do not match")
    return logits


def boundary_weights(gt, window=15):
    """1 + 5 |local mean(gt) - gt|: emphasizes pixels near mask borders.

    The local mean only counts cells inside the image, so a constant mask gets
    weight exactly 1 everywhere, including along the image border.
    """
    pooled = F.avg_pool2d(gt, window, stride=1, padding=window // 2, count_include_pad=False)
    return 1 + 5 * torch.abs(pooled - gt)


def weighted_bce(logits, gt, window=15):
    _check_gt(gt)
    logits = _match(logits, gt)
    w = boundary_weights(gt, window)
    bce = F.binary_cross_entropy_with_logits(logits, gt, reduction="none")
    return ((w * bce).sum(dim=(2, 3)) / w.sum(dim=(2, 3))).mean()


def weighted_iou(logits, gt, window=15):
    _check_gt(gt)
    logits = _match(logits, gt)
    w = boundary_weights(gt, window)
    p = torch.sigmoid(logits)
    inter = (w * p * gt).sum(dim=(2, 3))
    union = (w * (p + gt - p * gt)).sum(dim=(2, 3))
    return (1 - (inter + 1) / (union + 1)).mean()


def dice_edge(logits, edge_gt, eps=1.0):
    _check_gt(edge_gt, "edge_gt")
    logits = _match(logits, edge_gt)
    p = torch.sigmoid(logits)
    num = 2 * (p * edge_gt).sum(dim=(2, 3)) + eps
    den = p.sum(dim=(2, 3)) + edge_gt.sum(dim=(2, 3)) + eps
    return (1 - num / den).mean()


@dataclass
class LossBreakdown:
    bce: Dict[str, torch.Tensor] = field(default_factory=dict)
    iou: Dict[str, torch.Tensor] = field(default_factory=dict)
    dice: Dict[str, torch.Tensor] = field(default_factory=dict)
    total: torch.Tensor = None

    def as_floats(self):
        out = {"total": self.total.item()}
        for kind in ("bce", "iou", "dice"):
            for key, value in getattr(self, kind).items():
                out[f"{kind}_{key}"] = value.item()
        return out


def total_loss(output, gt, edge_gt, window=15) -> LossBreakdown:
    """Level-weighted sum of (bce + iou) on saliency maps and R6, and dice on edges.

    ``output`` is any object with ``sal_logits``/``edge_logits`` dicts keyed by
    level and an ``r6`` map.
    """
    _check_gt(gt)
    _check_gt(edge_gt, "edge_gt")
    out = LossBreakdown()
    out.bce["r6"] = weighted_bce(output.r6, gt, window)
    out.iou["r6"] = weighted_iou(output.r6, gt, window)
    total = R6_WEIGHT * (out.bce["r6"] + out.iou["r6"])
    for lvl, weight in SALIENCY_WEIGHTS.items():
        key = f"sal{lvl}"
        out.bce[key] = weighted_bce(output.sal_logits[lvl], gt, window)
        out.iou[key] = weighted_iou(output.sal_logits[lvl], gt, window)
        total = total + weight * (out.bce[key] + out.iou[key])
    for lvl, weight in EDGE_WEIGHTS.items():
        key = f"edge{lvl}"
        out.dice[key] = dice_edge(output.edge_logits[lvl], edge_gt)
        total = total + weight * out.dice[key]
    out.total = total
    return out
