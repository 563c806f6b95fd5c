"""Dataset ingestion, edge ground truth, augmentation and synthetic data.

Arrays are numpy, channel-first: images [3, H, W] float32 in [0, 1], masks
[1, H, W] float32 in {0, 1}. Conversion to normalized torch tensors happens
in :func:`resize_normalize`.
"""
import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image
from scipy import ndimage as ndi
from torch.utils.data import Dataset

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class ManifestError(ValueError):
    pass


@dataclass
class Sample:
    image: np.ndarray
    sal_gt: np.ndarray
    edge_gt: np.ndarray
    id: str
    meta: dict = field(default_factory=dict, compare=False)


@dataclass
class DatasetManifest:
    pairs: List[Tuple[Path, Path]]
    split: str

    def __len__(self):
        return len(self.pairs)

    @property
    def stems(self):
        return [img.stem for img, _ in self.pairs]


def _index(directory: Path):
    if not directory.is_dir():
        raise ManifestError(f"missing directory {directory}")
    files = {}
    for path in sorted(directory.iterdir()):
        if path.suffix.lower() not in IMAGE_EXTS:
            continue
        if path.stem in files:
            raise ManifestError(f"duplicate stem {path.stem!r} in {directory}")
        files[path.stem] = path
    return files


def load_manifest(root, split) -> DatasetManifest:
    """Pair ``<root>/<split>/images/*`` with ``<root>/<split>/GT/*`` by file stem."""
    base = Path(root) / split
    images, masks = _index(base / "images"), _index(base / "GT")
    no_mask = sorted(set(images) - set(masks))
    no_image = sorted(set(masks) - set(images))
    if no_mask or no_image:
        raise ManifestError(f"unpaired files in {base}: images without mask {no_mask}, masks without image {no_image}")
    if not images:
        raise ManifestError(f"no images found in {base / 'images'}")
    return DatasetManifest([(images[s], masks[s]) for s in sorted(images)], split)


def holdout_split(stems, fraction=0.1):
    """Deterministic (train, val) stem lists: the lowest-hash ``fraction`` is held out."""
    stems = sorted(stems)
    if len(stems) < 2:
        return stems, []
    ranked = sorted(stems, key=lambda s: hashlib.sha1(s.encode()).hexdigest())
    n_val = max(1, round(fraction * len(stems)))
    val = set(ranked[:n_val])
    return [s for s in stems if s not in val], [s for s in stems if s in val]


def derive_edge_gt(sal_gt):
    """3x3 morphological gradient (dilation minus erosion) of a binary mask.

    Works on [H, W] or [1, H, W]; borders replicate the mask.
    """
    mask = np.asarray(sal_gt) > 0.5
    squeeze = mask.ndim == 3
    m = mask[0] if squeeze else mask
    m = m.astype(np.uint8)
    grad = ndi.grey_dilation(m, size=(3, 3), mode="nearest") - ndi.grey_erosion(m, size=(3, 3), mode="nearest")
    edge = (grad > 0).astype(np.float32)
    return edge[None] if squeeze else edge


def load_sample(image_path, mask_path) -> Sample:
    image = np.asarray(Image.open(image_path).convert("RGB"), dtype=np.float32) / 255.0
    mask = np.asarray(Image.open(mask_path).convert("L"), dtype=np.float32) / 255.0
    if image.shape[:2] != mask.shape:
        raise ManifestError(f"{Path(image_path).stem}: image {image.shape[:2]} and mask {mask.shape} sizes differ")
    sal = (mask >= 0.5).astype(np.float32)[None]
    return Sample(image.transpose(2, 0, 1).copy(), sal, derive_edge_gt(sal), Path(image_path).stem)


def _resize(arr, size, mode):
    t = torch.from_numpy(np.ascontiguousarray(arr))[None]
    if mode == "nearest":
        out = F.interpolate(t, size=size, mode="nearest")
    else:
        out = F.interpolate(t, size=size, mode="bilinear", align_corners=False)
    return out[0].numpy()


def augment(sample: Sample, seed, flip: Optional[bool] = None, rotate: Optional[int] = None, crop=True) -> Sample:
    """Random horizontal flip, right-angle rotation and crop-and-resize.

    ``flip`` / ``rotate`` (number of quarter turns) force the respective step
    instead of drawing it. Edges are re-derived from the transformed mask.
    """
    rng = np.random.default_rng(seed)
    do_flip = rng.random() < 0.5
    do_rot = rng.random() < 0.5
    k = int(rng.integers(1, 4))
    scale = rng.uniform(0.75, 1.0)
    u, v = rng.random(2)
    if flip is not None:
        do_flip = flip
    if rotate is not None:
        do_rot, k = rotate % 4 != 0, rotate % 4

    image, sal = sample.image, sample.sal_gt
    if do_flip:
        image, sal = image[..., ::-1], sal[..., ::-1]
    if do_rot:
        image, sal = np.rot90(image, k, axes=(1, 2)), np.rot90(sal, k, axes=(1, 2))
    if crop:
        h, w = image.shape[-2:]
        ch, cw = max(1, round(scale * h)), max(1, round(scale * w))
        top, left = int(u * (h - ch + 1)), int(v * (w - cw + 1))
        image = image[:, top:top + ch, left:left + cw]
        sal = sal[:, top:top + ch, left:left + cw]
        if (ch, cw) != (h, w):
            image = np.clip(_resize(image, (h, w), "bilinear"), 0.0, 1.0)
            sal = _resize(sal, (h, w), "nearest")
    image = np.ascontiguousarray(image, dtype=np.float32)
    sal = np.ascontiguousarray(sal, dtype=np.float32)
    return replace(sample, image=image, sal_gt=sal, edge_gt=derive_edge_gt(sal))


def resize_normalize(sample: Sample, size=352):
    """Model-ready tensors (image, sal_gt, edge_gt) at ``size`` x ``size``."""
    size = (size, size) if isinstance(size, int) else tuple(size)
    image = torch.from_numpy(_resize(sample.image, size, "bilinear"))
    mean = torch.tensor(IMAGENET_MEAN).view(3, 1, 1)
    std = torch.tensor(IMAGENET_STD).view(3, 1, 1)
    image = (image - mean) / std
    sal = torch.from_numpy(_resize(sample.sal_gt, size, "nearest"))
    edge = torch.from_numpy(_resize(sample.edge_gt, size, "nearest"))
    return image, sal, edge


def rasterize(shape: dict, size) -> np.ndarray:
    """Boolean mask of an ellipse or axis-aligned rectangle, sampled at pixel centres."""
    h, w = size
    yy, xx = np.mgrid[0:h, 0:w] + 0.5
    if shape["kind"] == "ellipse":
        return ((xx - shape["cx"]) / shape["rx"]) ** 2 + ((yy - shape["cy"]) / shape["ry"]) ** 2 <= 1.0
    if shape["kind"] == "rect":
        return (np.abs(xx - shape["cx"]) <= shape["rx"]) & (np.abs(yy - shape["cy"]) <= shape["ry"])
    raise ValueError(f"unknown shape kind {shape['kind']!r}")


def _texture(rng, size, base):
    h, w = size
    noise = ndi.gaussian_filter(rng.standard_normal((3, h, w)), sigma=(0, 2, 2))
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    freq, phase = rng.uniform(2, 8), rng.uniform(0, 2 * math.pi)
    stripes = 0.1 * np.sin(2 * math.pi * freq * (xx + yy) + phase)
    return np.asarray(base)[:, None, None] + 0.15 * noise + stripes


def synth_sample(seed, size=64, index=0) -> Sample:
    """One image with 1-3 random ellipses/rectangles; foreground fraction in [0.05, 0.6]."""
    rng = np.random.default_rng(seed)
    h = w = size
    while True:
        shapes = []
        for _ in range(int(rng.integers(1, 4))):
            shapes.append({
                "kind": str(rng.choice(["ellipse", "rect"])),
                "cx": float(rng.uniform(0.2, 0.8) * w),
                "cy": float(rng.uniform(0.2, 0.8) * h),
                "rx": float(rng.uniform(0.08, 0.3) * w),
                "ry": float(rng.uniform(0.08, 0.3) * h),
            })
        mask = np.zeros((h, w), bool)
        for s in shapes:
            mask |= rasterize(s, (h, w))
        if 0.05 <= mask.mean() <= 0.6:
            break
    bg_color, fg_color = rng.uniform(0.1, 0.5, 3), rng.uniform(0.5, 0.9, 3)
    image = np.where(mask[None], _texture(rng, (h, w), fg_color), _texture(rng, (h, w), bg_color))
    image = np.clip(image, 0, 1).astype(np.float32)
    sal = mask.astype(np.float32)[None]
    return Sample(image, sal, derive_edge_gt(sal), f"synth_{index:04d}", {"shapes": shapes})


def synth_dataset(n, size=64, seed=0) -> List[Sample]:
    return [synth_sample([seed, i], size, i) for i in range(n)]


def write_dataset(samples: List[Sample], root, split):
    """Write samples in the on-disk layout expected by :func:`load_manifest`."""
    base = Path(root) / split
    (base / "images").mkdir(parents=True, exist_ok=True)
    (base / "GT").mkdir(parents=True, exist_ok=True)
    for s in samples:
        img = (s.image.transpose(1, 2, 0) * 255).round().astype(np.uint8)
        Image.fromarray(img).save(base / "images" / f"{s.id}.png")
        Image.fromarray((s.sal_gt[0] * 255).astype(np.uint8)).save(base / "GT" / f"{s.id}.png")
    return base


class SODDataset(Dataset):
    """Torch dataset over a manifest or in-memory samples.

    Augmentation seeds are derived from (seed, epoch, index), so the stream is
    the same for any number of loader workers. Call :meth:`set_epoch` between
    epochs.
    """

    def __init__(self, items, image_size=352, augment=False, seed=0):
        if isinstance(items, DatasetManifest):
            items = list(items.pairs)
        self.items = list(items)
        self.image_size = image_size
        self.augment = augment
        self.seed = seed
        self.epoch = 0

    def set_epoch(self, epoch):
        self.epoch = epoch

    def __len__(self):
        return len(self.items)

    def sample(self, index) -> Sample:
        item = self.items[index]
        return item if isinstance(item, Sample) else load_sample(*item)

    def __getitem__(self, index):
        s = self.sample(index)
        if self.augment:
            s = augment(s, [self.seed, self.epoch, index])
        image, sal, edge = resize_normalize(s, self.image_size)
        return {"image": image, "sal_gt": sal, "edge_gt": edge, "id": s.id}
