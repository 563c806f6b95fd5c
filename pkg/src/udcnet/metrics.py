"""Saliency evaluation: MAE, F-measure family, S-measure, E-measure.

All per-image functions take float maps ``pred`` in [0, 1] and binary ``gt``
of the same shape (numpy arrays). :func:`evaluate_pair` applies per-image
min-max normalization first; the individual metrics do not.
"""
import csv
import json
from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np
from scipy import ndimage as ndi

EPS = np.spacing(1.0)
N_THRESHOLDS = 256
THRESHOLDS = np.linspace(0.0, 1.0, N_THRESHOLDS)
BETA2 = 0.3


def _prep(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt) > 0.5
    if pred.shape != gt.shape:
        raise ValueError(f"pred {pred.shape} and gt {gt.shape} differ in shape")
    return pred, gt


def minmax_normalize(pred):
    pred = np.asarray(pred, dtype=np.float64)
    lo, hi = pred.min(), pred.max()
    if hi > lo:
        return (pred - lo) / (hi - lo)
    return pred


def mae(pred, gt):
    pred, gt = _prep(pred, gt)
    return float(np.abs(pred - gt).mean())


def _f_score(p, r, beta2=BETA2):
    den = beta2 * p + r
    return np.where(den > 0, (1 + beta2) * p * r / np.where(den > 0, den, 1), 0.0)


def pr_curve(pred, gt, thresholds=THRESHOLDS):
    """Precision and recall of ``pred > t`` for every threshold ``t``.

    Counting is done with a histogram so the cost is O(N + T).
    """
    pred, gt = _prep(pred, gt)
    # pixel is positive at threshold t iff pred > t: count pixels above each edge
    order = np.sort(pred[gt])
    order_bg = np.sort(pred[~gt])
    tp = order.size - np.searchsorted(order, thresholds, side="right")
    fp = order_bg.size - np.searchsorted(order_bg, thresholds, side="right")
    n_fg = gt.sum()
    pos = tp + fp
    precision = np.where(pos > 0, tp / np.maximum(pos, 1), 0.0)
    recall = tp / n_fg if n_fg else np.zeros_like(precision, dtype=np.float64)
    return precision.astype(np.float64), recall.astype(np.float64)


def f_measures(pred, gt, beta2=BETA2):
    """(f_max, f_avg, f_curve, (precision, recall)) over 256 thresholds."""
    precision, recall = pr_curve(pred, gt)
    f_curve = _f_score(precision, recall, beta2)
    return float(f_curve.max()), float(f_curve.mean()), f_curve, (precision, recall)


def _binarize_adaptive(pred):
    # zero-valued pixels never count as foreground, so an all-zero map stays empty
    thr = min(2 * pred.mean(), 1.0)
    return (pred >= thr) & (pred > 0)


def adaptive_f(pred, gt, beta2=BETA2):
    pred, gt = _prep(pred, gt)
    binary = _binarize_adaptive(pred)
    tp = np.sum(binary & gt)
    p = tp / binary.sum() if binary.sum() else 0.0
    r = tp / gt.sum() if gt.sum() else 0.0
    return float(_f_score(np.float64(p), np.float64(r), beta2))


def gaussian_kernel(size=7, sigma=5.0):
    half = (size - 1) / 2
    y, x = np.ogrid[-half:half + 1, -half:half + 1]
    h = np.exp(-(x * x + y * y) / (2 * sigma * sigma))
    h[h < np.finfo(h.dtype).eps * h.max()] = 0
    return h / h.sum()


def weighted_f(pred, gt, beta2=1.0):
    pred, gt = _prep(pred, gt)
    if not gt.any():
        return 0.0
    dist, idx = ndi.distance_transform_edt(~gt, return_indices=True)
    err = np.abs(pred - gt)
    # background pixels inherit the error of their nearest foreground pixel
    err_t = err.copy()
    bg = ~gt
    err_t[bg] = err[idx[0][bg], idx[1][bg]]
    err_a = ndi.convolve(err_t, gaussian_kernel(), mode="constant", cval=0.0)
    min_e = np.where(gt & (err_a < err), err_a, err)
    importance = np.where(bg, 2 - np.exp(np.log(0.5) / 5 * dist), 1.0)
    ew = min_e * importance
    tpw = gt.sum() - ew[gt].sum()
    fpw = ew[bg].sum()
    recall = 1 - ew[gt].mean()
    precision = tpw / (tpw + fpw + EPS)
    return float((1 + beta2) * recall * precision / (recall + beta2 * precision + EPS))


def _object_score(x, mask):
    vals = x[mask]
    mean = vals.mean()
    sigma = vals.std(ddof=1) if vals.size > 1 else 0.0
    return 2 * mean / (mean * mean + 1 + sigma + EPS)


def _s_object(pred, gt):
    fg = pred * gt
    bg = (1 - pred) * ~gt
    u = gt.mean()
    return u * _object_score(fg, gt) + (1 - u) * _object_score(bg, ~gt)


def _ssim(pred, gt):
    n = pred.size
    x, y = pred.mean(), gt.mean()
    sx = ((pred - x) ** 2).sum() / (n - 1 + EPS)
    sy = ((gt - y) ** 2).sum() / (n - 1 + EPS)
    sxy = ((pred - x) * (gt - y)).sum() / (n - 1 + EPS)
    alpha = 4 * x * y * sxy
    beta = (x * x + y * y) * (sx + sy)
    if alpha != 0:
        return alpha / (beta + EPS)
    return 1.0 if beta == 0 else 0.0


def _centroid(gt):
    h, w = gt.shape
    if not gt.any():
        return int(round(w / 2)), int(round(h / 2))
    rows, cols = np.nonzero(gt)
    return int(np.round(cols.mean())) + 1, int(np.round(rows.mean())) + 1


def _s_region(pred, gt):
    h, w = gt.shape
    x, y = _centroid(gt)
    gtf = gt.astype(np.float64)
    score = 0.0
    for rs, cs in ((slice(0, y), slice(0, x)), (slice(0, y), slice(x, w)),
                   (slice(y, h), slice(0, x)), (slice(y, h), slice(x, w))):
        p, g = pred[rs, cs], gtf[rs, cs]
        if p.size:  # empty quadrants carry zero weight
            score += p.size / (h * w) * _ssim(p, g)
    return score


def s_measure(pred, gt, alpha=0.5):
    pred, gt = _prep(pred, gt)
    y = gt.mean()
    if y == 0:
        return float(1 - pred.mean())
    if y == 1:
        return float(pred.mean())
    s = alpha * _s_object(pred, gt) + (1 - alpha) * _s_region(pred, gt)
    return float(max(s, 0.0))


def _enhanced_alignment(binary, gt):
    fm = binary.astype(np.float64)
    g = gt.astype(np.float64)
    if not gt.any():
        return float(1 - fm.mean())
    if gt.all():
        return float(fm.mean())
    phi_s = fm - fm.mean()
    phi_g = g - g.mean()
    xi = 2 * phi_s * phi_g / (phi_s ** 2 + phi_g ** 2 + EPS)
    return float(((xi + 1) ** 2 / 4).mean())


def e_measure(pred, gt):
    """Enhanced-alignment measure at the adaptive threshold."""
    pred, gt = _prep(pred, gt)
    return _enhanced_alignment(_binarize_adaptive(pred), gt)


def e_curve(pred, gt, thresholds=THRESHOLDS):
    pred, gt = _prep(pred, gt)
    return np.array([_enhanced_alignment(pred > t, gt) for t in thresholds])


@dataclass
class MetricReport:
    mae: float
    f_max: float
    f_avg: float
    f_adaptive: float
    f_weighted: float
    s_measure: float
    e_measure: float
    e_mean: float
    e_max: float
    precision: List[float] = field(repr=False)
    recall: List[float] = field(repr=False)
    f_curve: List[float] = field(repr=False)
    n_images: int = 1

    SCALARS = ("mae", "f_max", "f_avg", "f_adaptive", "f_weighted", "s_measure", "e_measure", "e_mean", "e_max")

    def scalars(self):
        return {k: getattr(self, k) for k in self.SCALARS}

    def to_json(self):
        return json.dumps(asdict(self), indent=2) + "\n"

    def write_curves_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold", "precision", "recall", "f"])
            for t, p, r, f in zip(THRESHOLDS, self.precision, self.recall, self.f_curve):
                writer.writerow([f"{t:.6f}", f"{p:.6f}", f"{r:.6f}", f"{f:.6f}"])


def evaluate_pair(pred, gt, normalize=True) -> MetricReport:
    pred, gt = _prep(pred, gt)
    if normalize:
        pred = minmax_normalize(pred)
    f_max, f_avg, f_curve, (precision, recall) = f_measures(pred, gt)
    ec = e_curve(pred, gt)
    return MetricReport(
        mae=mae(pred, gt),
        f_max=f_max,
        f_avg=f_avg,
        f_adaptive=adaptive_f(pred, gt),
        f_weighted=weighted_f(pred, gt),
        s_measure=s_measure(pred, gt),
        e_measure=e_measure(pred, gt),
        e_mean=float(ec.mean()),
        e_max=float(ec.max()),
        precision=precision.tolist(),
        recall=recall.tolist(),
        f_curve=f_curve.tolist(),
    )


def aggregate(reports: List[MetricReport]) -> MetricReport:
    """Dataset-level report.

    Curves are averaged over images and ``f_max`` is the peak of the averaged
    F curve; every other scalar is the plain mean of the per-image values.
    """
    if not reports:
        raise ValueError("no reports to aggregate")
    mean = lambda key: float(np.mean([getattr(r, key) for r in reports]))  # noqa: E731
    curve = lambda key: np.mean([getattr(r, key) for r in reports], axis=0)  # noqa: E731
    f_curve = curve("f_curve")
    return MetricReport(
        mae=mean("mae"),
        f_max=float(f_curve.max()),
        f_avg=mean("f_avg"),
        f_adaptive=mean("f_adaptive"),
        f_weighted=mean("f_weighted"),
        s_measure=mean("s_measure"),
        e_measure=mean("e_measure"),
        e_mean=mean("e_mean"),
        e_max=mean("e_max"),
        precision=curve("precision").tolist(),
        recall=curve("recall").tolist(),
        f_curve=f_curve.tolist(),
        n_images=len(reports),
    )
