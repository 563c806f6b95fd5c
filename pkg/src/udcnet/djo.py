"""Dual-branch joint optimization decoder.

Each level fuses its FSDT feature with the aggregated guidance from higher
levels, then runs a saliency branch (local conv + frequency path +
spatial-frequency reverse attention) and an edge branch (EEM + GEF).
"""
from dataclasses import dataclass
from typing import List, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from .fsdt import AFS
from .frequency import ComplexSpectrum, fft2d, ifft2d, magnitude
from .layers import ConvBNReLU, ConvStack, SpatialAttention, conv1x1, upsample_to


def reverse_attention(x):
    """1 - sigmoid(x)."""
    return 1.0 - torch.sigmoid(x)


def sf_multiplier(g):
    """Spatial-plus-frequency reverse-attention weight for a guidance logit map."""
    return reverse_attention(g) + reverse_attention(magnitude(fft2d(g)))


def sf_reverse_attention(f_h, g):
    return f_h * sf_multiplier(g)


def gradient_enhance(x, lam):
    """Unsharp mask: x + lam * (x - local 3x3 mean).

    The high-pass term is accumulated as the mean of differences to each
    (replicate-padded) neighbour, which is exactly zero on constant maps.
    """
    h, w = x.shape[-2:]
    padded = F.pad(x, (1, 1, 1, 1), mode="replicate")
    high = 0
    for dy in range(3):
        for dx in range(3):
            high = high + (x - padded[..., dy:dy + h, dx:dx + w])
    return x + lam * (high / 9.0)


class GEF(nn.Module):
    def __init__(self, init=1.0):
        super().__init__()
        self.lam = nn.Parameter(torch.tensor(float(init)))

    def forward(self, x):
        return gradient_enhance(x, self.lam)


class SpectralFilter(nn.Module):
    """Learnable per-channel, per-frequency complex filter, initialized to 1+0i.

    The filter is stored at a reference grid and bilinearly resized when the
    input grid differs.
    """

    def __init__(self, channels, size):
        super().__init__()
        h, w = size
        self.real = nn.Parameter(torch.ones(channels, h, w))
        self.imag = nn.Parameter(torch.zeros(channels, h, w))

    def weights(self, size):
        real, imag = self.real, self.imag
        if tuple(real.shape[-2:]) != tuple(size):
            real = F.interpolate(real[None], size=size, mode="bilinear", align_corners=True)[0]
            imag = F.interpolate(imag[None], size=size, mode="bilinear", align_corners=True)[0]
        return ComplexSpectrum(real, imag)

    def forward(self, x):
        spec = fft2d(x)
        return ifft2d(spec * self.weights(x.shape[-2:]))


class SaliencyBranch(nn.Module):
    def __init__(self, channels, size, freq_path="filter"):
        super().__init__()
        self.freq_path = freq_path
        self.local = ConvStack(channels, channels)
        self.filter = SpectralFilter(channels, size) if freq_path == "filter" else None

    def frequency(self, x):
        if self.filter is None:
            return magnitude(ifft2d(fft2d(x), keep_complex=True))
        return self.filter(x)

    def forward(self, h_in1):
        return self.local(h_in1) + self.frequency(h_in1)


class EdgeBranch(nn.Module):
    """Edge enhancement (small-kernel convs + spatial attention), conv head, GEF."""

    def __init__(self, channels):
        super().__init__()
        self.small = nn.Sequential(
            ConvBNReLU(channels, channels, 1),
            ConvBNReLU(channels, channels, 3),
            ConvBNReLU(channels, channels, 1),
        )
        self.sa = SpatialAttention()
        self.conv = ConvStack(channels, channels)
        self.merge = conv1x1(2 * channels, channels)
        self.head = nn.Sequential(
            ConvBNReLU(channels, channels, 3),
            ConvBNReLU(channels, channels, 3),
            nn.Conv2d(channels, 1, 3, padding=1),
        )
        self.gef = GEF()

    def forward(self, h_in1):
        s = self.small(h_in1)
        h_e1 = self.merge(torch.cat([self.sa(s), self.conv(s)], dim=1))
        return h_e1, self.gef(self.head(h_e1))


@dataclass
class DJOLevelOutputs:
    sal_logits: torch.Tensor
    edge_logits: torch.Tensor


class DJOLevel(nn.Module):
    def __init__(self, channels, size, freq_path="filter"):
        super().__init__()
        self.project = conv1x1(1, channels)
        self.afs = AFS(channels)
        self.saliency = SaliencyBranch(channels, size, freq_path)
        self.edge = EdgeBranch(channels)
        self.predict = nn.Sequential(
            ConvBNReLU(3 * channels, 2 * channels, 3),
            ConvBNReLU(2 * channels, channels, 3),
            nn.Conv2d(channels, 1, 3, padding=1),
        )

    @staticmethod
    def aggregate(guidance: Sequence[torch.Tensor], size):
        if not guidance:
            raise ValueError("a DJO level needs at least one guidance map")
        maps = [upsample_to(g, size) for g in guidance]
        if any(m.shape[1] != 1 for m in maps):
            raise ValueError("guidance maps must have exactly one channel")
        return maps, sum(maps)

    def forward(self, f_h, guidance: List[torch.Tensor]) -> DJOLevelOutputs:
        """``guidance`` is ordered nearest level first (R6 alone at the top)."""
        maps, g = self.aggregate(guidance, f_h.shape[-2:])
        h_in1 = self.afs(self.project(g), f_h)
        h_lg = self.saliency(h_in1)
        h_ra = sf_reverse_attention(f_h, g)
        h_e1, h_em = self.edge(h_in1)
        h_sm = self.predict(torch.cat([h_lg, h_ra, h_e1], dim=1)) + maps[0]
        return DJOLevelOutputs(h_sm, h_em)


class SimpleLevel(nn.Module):
    """Ablation stand-in for a DJO level: FPN-style conv heads."""

    def __init__(self, channels):
        super().__init__()
        self.body = ConvBNReLU(channels, channels, 3)
        self.sal = nn.Conv2d(channels, 1, 3, padding=1)
        self.edge = nn.Conv2d(channels, 1, 3, padding=1)

    def forward(self, f_h, guidance: List[torch.Tensor]) -> DJOLevelOutputs:
        x = self.body(f_h)
        residual = upsample_to(guidance[0], f_h.shape[-2:]) if guidance else 0
        return DJOLevelOutputs(self.sal(x) + residual, self.edge(x))
