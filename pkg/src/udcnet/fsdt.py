"""Frequency-spatial domain transformer block.

Data flow for one pyramid level::

    F_o, F_next --fuse--> In1 --+-- SPSA --+
                                +-- FPSA --+-- AFS --> F_A
    In2 = F_A + pw(F_o);  F_cd = CDFFN(In2)
    F_h = pw(cat(F_cd + In2, conv(F_o))) + pw(F_o)
"""
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import FSDTConfig
from .frequency import ComplexSpectrum, complex_matmul, complex_softmax, fft2d, ifft2d, magnitude
from .layers import (
    ConvBNReLU,
    ConvStack,
    DepthwiseSeparableConv,
    LayerNorm2d,
    ResidualChannelSpatialAttention,
    conv1x1,
)


class FuseInputs(nn.Module):
    def __init__(self, in_ch, channels, next_ch=0):
        super().__init__()
        self.next_ch = next_ch
        self.reduce = conv1x1(in_ch + next_ch, channels)
        self.norm = LayerNorm2d(channels)

    def forward(self, f_o, f_next=None):
        if f_next is not None:
            if not self.next_ch:
                raise ValueError("this level was built without a successor input")
            f_next = F.interpolate(f_next, scale_factor=2, mode="bilinear", align_corners=False)
            if f_next.shape[-2:] != f_o.shape[-2:]:
                raise ValueError(
                    f"upsampled successor {tuple(f_next.shape[-2:])} does not match level size {tuple(f_o.shape[-2:])}"
                )
            x = torch.cat([f_o, f_next], dim=1)
        elif self.next_ch:
            raise ValueError("a successor feature map is required below the top level")
        else:
            x = f_o
        return self.norm(self.reduce(x))


def _heads(x, heads):
    # [B, C, H, W] -> [B, heads, C/heads, HW]
    b, c, h, w = x.shape
    return x.reshape(b, heads, c // heads, h * w)


def _l2norm(x, dim=-1, eps=1e-12):
    return x / x.pow(2).sum(dim, keepdim=True).clamp_min(eps * eps).sqrt()


def _complex_l2norm(z: ComplexSpectrum, dim=-1, eps=1e-12) -> ComplexSpectrum:
    norm = (z.real.pow(2) + z.imag.pow(2)).sum(dim, keepdim=True).clamp_min(eps * eps).sqrt()
    return z.scale(1.0 / norm)


class SPSA(nn.Module):
    """Channel-transposed self-attention over multi-kernel spatial projections."""

    def __init__(self, channels, kernels=(3, 5, 7), heads=1, qk_norm=True):
        super().__init__()
        if channels % heads:
            raise ValueError("channels must be divisible by heads")
        self.heads = heads
        self.qk_norm = qk_norm
        self.pointwise = nn.ModuleList(conv1x1(channels, channels) for _ in range(3))
        self.multiscale = nn.ModuleList(
            nn.ModuleList(DepthwiseSeparableConv(channels, k) for k in kernels) for _ in range(3)
        )
        self.temperature = nn.Parameter(torch.ones(heads, 1, 1))
        self.proj = conv1x1(channels, channels)

    def qkv(self, x):
        out = []
        for pw, branches in zip(self.pointwise, self.multiscale):
            y = pw(x)
            out.append(sum(dc(y) for dc in branches))
        return out

    def attention(self, q, k):
        q, k = _heads(q, self.heads), _heads(k, self.heads)
        if self.qk_norm:
            q, k = _l2norm(q), _l2norm(k)
        return F.softmax(q @ k.transpose(-2, -1) * self.temperature, dim=-1)

    def forward(self, x):
        b, c, h, w = x.shape
        q, k, v = self.qkv(x)
        attn = self.attention(q, k)
        out = attn @ _heads(v, self.heads)
        return self.proj(out.reshape(b, c, h, w))


class FPSA(nn.Module):
    """Channel-transposed self-attention on complex Fourier spectra."""

    def __init__(self, channels, heads=1, softmax_policy="split", qk_norm=True):
        super().__init__()
        if channels % heads:
            raise ValueError("channels must be divisible by heads")
        self.heads = heads
        self.softmax_policy = softmax_policy
        self.qk_norm = qk_norm
        self.pointwise = nn.ModuleList(conv1x1(channels, channels) for _ in range(3))
        self.temperature = nn.Parameter(torch.ones(heads, 1, 1))
        self.proj = conv1x1(channels, channels)

    def _split(self, spec: ComplexSpectrum) -> ComplexSpectrum:
        return ComplexSpectrum(_heads(spec.real, self.heads), _heads(spec.imag, self.heads))

    def attention(self, q: ComplexSpectrum, k: ComplexSpectrum) -> ComplexSpectrum:
        q, k = self._split(q), self._split(k)
        if self.qk_norm:
            q, k = _complex_l2norm(q), _complex_l2norm(k)
        logits = complex_matmul(q, k.transpose(-2, -1)).scale(self.temperature)
        return complex_softmax(logits, dim=-1, policy=self.softmax_policy)

    def forward(self, x):
        b, c, h, w = x.shape
        q, k, v = (fft2d(pw(x)) for pw in self.pointwise)
        attn = self.attention(q, k)
        out = complex_matmul(attn, self._split(v)).reshape(b, c, h, w)
        return self.proj(magnitude(ifft2d(out, keep_complex=True)))


class AFS(nn.Module):
    """Adaptive fusion: add/mul/concat of two maps, conv reduction, residual CBAM."""

    def __init__(self, channels):
        super().__init__()
        self.reduce = nn.Sequential(
            ConvBNReLU(4 * channels, 3 * channels, 1),
            ConvBNReLU(3 * channels, 2 * channels, 3),
            ConvBNReLU(2 * channels, channels, 3),
        )
        self.rsc = ResidualChannelSpatialAttention(channels)

    def forward(self, a, b):
        if a.shape != b.shape:
            raise ValueError(f"AFS inputs differ in shape: {tuple(a.shape)} vs {tuple(b.shape)}")
        x = torch.cat([a, b, a + b, a * b], dim=1)
        return self.rsc(self.reduce(x))


class LocalEnhancement(nn.Module):
    def __init__(self, channels, dilations=(1, 2, 3)):
        super().__init__()
        self.atrous = nn.ModuleList(
            nn.Conv2d(channels, channels, 3, padding=d, dilation=d, groups=channels) for d in dilations
        )
        self.fuse = conv1x1(channels, channels)

    def forward(self, x):
        return self.fuse(sum(conv(x) for conv in self.atrous))


class CDFFN(nn.Module):
    """Feed-forward network with a local atrous branch and a spectral-gated global branch."""

    def __init__(self, channels, expansion=2, dilations=(1, 2, 3), global_mode="phase_preserving"):
        super().__init__()
        hidden = channels * expansion
        self.global_mode = global_mode
        self.norm = LayerNorm2d(channels)
        self.project_in = conv1x1(channels, hidden)
        self.dc_gate = DepthwiseSeparableConv(hidden, 3)
        self.dc_value = DepthwiseSeparableConv(hidden, 3)
        self.le = LocalEnhancement(hidden, dilations)
        self.project_out = conv1x1(2 * hidden, channels)

    def global_branch(self, x):
        spec = fft2d(x)
        # orthonormal scaling keeps the quadratic gate level-size independent
        mod = magnitude(spec) / (x.shape[-1] * x.shape[-2]) ** 0.5
        if self.global_mode == "literal":
            gated = F.gelu(mod) * mod
            return magnitude(ifft2d(fft2d(gated), keep_complex=True))
        # gate the magnitude but keep the phase: gelu(S) * S * X/|X| rescaled back
        # to the unnormalized spectrum is just gelu(S) * X, with no division by |X|
        gate = F.gelu(mod)
        return ifft2d(ComplexSpectrum(spec.real * gate, spec.imag * gate))

    def local_branch(self, x):
        return self.le(F.gelu(self.dc_gate(x)) * self.dc_value(x))

    def forward(self, x):
        x = self.project_in(self.norm(x))
        return self.project_out(torch.cat([self.local_branch(x), self.global_branch(x)], dim=1))


class FSDTBlock(nn.Module):
    def __init__(self, in_ch, channels, has_next, cfg: Optional[FSDTConfig] = None):
        super().__init__()
        cfg = cfg or FSDTConfig()
        self.has_next = has_next
        self.fuse = FuseInputs(in_ch, channels, channels if has_next else 0)
        self.spsa = SPSA(channels, cfg.dw_kernels, cfg.heads, cfg.qk_norm)
        self.fpsa = FPSA(channels, cfg.heads, cfg.complex_softmax, cfg.qk_norm)
        self.afs = AFS(channels)
        self.lateral = conv1x1(in_ch, channels)
        self.cdffn = CDFFN(channels, cfg.ffn_expansion, cfg.le_dilations, cfg.cdffn_global_mode)
        self.conv_o = ConvStack(in_ch, channels)
        self.merge = conv1x1(2 * channels, channels)
        self.skip = conv1x1(in_ch, channels)

    def forward(self, f_o, f_next=None):
        in1 = self.fuse(f_o, f_next)
        f_a = self.afs(self.spsa(in1), self.fpsa(in1))
        in2 = f_a + self.lateral(f_o)
        f_cd = self.cdffn(in2)
        return self.merge(torch.cat([f_cd + in2, self.conv_o(f_o)], dim=1)) + self.skip(f_o)


class LateralReduction(nn.Module):
    """Ablation stand-in for an FSDT block: 1x1 reduction of cat(F_o, up(F_next))."""

    def __init__(self, in_ch, channels, has_next):
        super().__init__()
        self.has_next = has_next
        self.reduce = ConvBNReLU(in_ch + (channels if has_next else 0), channels, 1)

    def forward(self, f_o, f_next=None):
        if f_next is not None:
            f_next = F.interpolate(f_next, size=f_o.shape[-2:], mode="bilinear", align_corners=False)
            f_o = torch.cat([f_o, f_next], dim=1)
        return self.reduce(f_o)
