"""Fourier-domain primitives shared by the FSDT block and the DJO decoder.

Spectra are carried as explicit real/imaginary planes. The forward transform
is unnormalized and the inverse carries the 1/(HW) factor, which matches the
``torch.fft`` defaults.
"""
import contextlib
from dataclasses import dataclass

import torch
import torch.nn.functional as F

SOFTMAX_POLICIES = ("split", "magnitude")
_CHECK_FINITE = [True]


@contextlib.contextmanager
def finite_checks(enabled: bool):
    """Toggle the non-finite input guard of :func:`fft2d`.

    The guard is data-dependent control flow, which ``torch.func.vmap`` cannot
    trace, so vectorized callers switch it off.
    """
    prev = _CHECK_FINITE[0]
    _CHECK_FINITE[0] = enabled
    try:
        yield
    finally:
        _CHECK_FINITE[0] = prev


@dataclass(frozen=True)
class ComplexSpectrum:
    real: torch.Tensor
    imag: torch.Tensor

    def __post_init__(self):
        if self.real.shape != self.imag.shape:
            raise ValueError(
                f"real and imag planes differ in shape: {tuple(self.real.shape)} vs {tuple(self.imag.shape)}"
            )

    @classmethod
    def from_complex(cls, z: torch.Tensor) -> "ComplexSpectrum":
        return cls(z.real, z.imag)

    def to_complex(self) -> torch.Tensor:
        return torch.complex(self.real, self.imag)

    @property
    def shape(self):
        return self.real.shape

    def reshape(self, *shape) -> "ComplexSpectrum":
        return ComplexSpectrum(self.real.reshape(*shape), self.imag.reshape(*shape))

    def transpose(self, dim0: int, dim1: int) -> "ComplexSpectrum":
        return ComplexSpectrum(self.real.transpose(dim0, dim1), self.imag.transpose(dim0, dim1))

    def scale(self, factor) -> "ComplexSpectrum":
        return ComplexSpectrum(self.real * factor, self.imag * factor)

    def __add__(self, other: "ComplexSpectrum") -> "ComplexSpectrum":
        return ComplexSpectrum(self.real + other.real, self.imag + other.imag)

    def __mul__(self, other: "ComplexSpectrum") -> "ComplexSpectrum":
        # elementwise complex product
        return ComplexSpectrum(
            self.real * other.real - self.imag * other.imag,
            self.real * other.imag + self.imag * other.real,
        )


def fft2d(x: torch.Tensor, check_finite: bool = True) -> ComplexSpectrum:
    """Full 2-D DFT over the last two axes of a real tensor."""
    if x.dim() < 2 or x.shape[-1] < 1 or x.shape[-2] < 1:
        raise ValueError(f"fft2d needs at least a 1x1 spatial grid, got shape {tuple(x.shape)}")
    if check_finite and _CHECK_FINITE[0] and not torch.isfinite(x).all():
        raise FloatingPointError("fft2d received non-finite activations")
    return ComplexSpectrum.from_complex(torch.fft.fft2(x))


def ifft2d(X: ComplexSpectrum, strict: bool = False, keep_complex: bool = False):
    """Inverse of :func:`fft2d`.

    Returns the real part by default. ``keep_complex`` hands back the full
    complex field as a :class:`ComplexSpectrum`; ``strict`` asserts the
    imaginary residue is negligible, which only holds for Hermitian input.
    """
    z = torch.fft.ifft2(X.to_complex())
    if keep_complex:
        return ComplexSpectrum.from_complex(z)
    if strict:
        residue = z.imag.abs().max().item() if z.numel() else 0.0
        if residue >= 1e-4:
            raise ValueError(f"imaginary residue {residue:.3e} exceeds 1e-4; spectrum is not from a real signal")
    return z.real


def magnitude(X: ComplexSpectrum) -> torch.Tensor:
    # torch.abs on a complex tensor has a zero subgradient at the origin,
    # unlike sqrt(r^2 + i^2) whose derivative is undefined there.
    return torch.abs(X.to_complex())


def complex_softmax(X: ComplexSpectrum, dim: int = -1, policy: str = "split") -> ComplexSpectrum:
    """Softmax over a complex tensor.

    ``split`` normalizes the real and imaginary planes independently.
    ``magnitude`` takes the softmax of the moduli and keeps each entry's phase
    (entries with zero modulus get phase 0).
    """
    if policy == "split":
        return ComplexSpectrum(F.softmax(X.real, dim=dim), F.softmax(X.imag, dim=dim))
    if policy == "magnitude":
        mod = magnitude(X)
        weights = F.softmax(mod, dim=dim)
        nonzero = mod > 0
        safe = torch.where(nonzero, mod, torch.ones_like(mod))
        cos = torch.where(nonzero, X.real / safe, torch.ones_like(mod))
        sin = torch.where(nonzero, X.imag / safe, torch.zeros_like(mod))
        return ComplexSpectrum(weights * cos, weights * sin)
    raise ValueError(f"unknown complex softmax policy {policy!r}; expected one of {SOFTMAX_POLICIES}")


def complex_matmul(A: ComplexSpectrum, B: ComplexSpectrum) -> ComplexSpectrum:
    if A.shape[-1] != B.shape[-2]:
        raise ValueError(f"inner dimensions differ: {tuple(A.shape)} @ {tuple(B.shape)}")
    return ComplexSpectrum(
        A.real @ B.real - A.imag @ B.imag,
        A.real @ B.imag + A.imag @ B.real,
    )
