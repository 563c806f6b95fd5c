import math

import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from udcnet.frequency import ComplexSpectrum, complex_matmul, complex_softmax, fft2d, finite_checks, ifft2d, magnitude

shapes = st.tuples(st.integers(1, 3), st.integers(1, 4), st.integers(1, 12), st.integers(1, 12))


@given(shapes, st.integers(0, 2**16))
def test_roundtrip_double(shape, seed):
    x = torch.randn(shape, generator=torch.Generator().manual_seed(seed), dtype=torch.float64)
    assert (ifft2d(fft2d(x), strict=True) - x).abs().max() < 1e-10


@given(shapes, st.integers(0, 2**16))
def test_real_input_has_hermitian_spectrum(shape, seed):
    x = torch.randn(shape, generator=torch.Generator().manual_seed(seed), dtype=torch.float64)
    X = fft2d(x).to_complex()
    h, w = shape[-2:]
    flipped = torch.roll(torch.flip(X, dims=(-2, -1)), shifts=(1, 1), dims=(-2, -1))
    assert torch.allclose(X, flipped.conj(), atol=1e-9)


def test_dc_term_is_sum():
    x = torch.arange(12.0, dtype=torch.float64).reshape(1, 1, 3, 4)
    X = fft2d(x)
    assert X.real[0, 0, 0, 0] == x.sum()
    assert X.imag[0, 0, 0, 0] == 0


def test_single_impulse_has_flat_unit_spectrum():
    x = torch.zeros(1, 1, 4, 4, dtype=torch.float64)
    x[..., 0, 0] = 1
    assert torch.allclose(magnitude(fft2d(x)), torch.ones(1, 1, 4, 4, dtype=torch.float64))


def test_nonfinite_input_rejected():
    x = torch.zeros(1, 1, 4, 4)
    x[0, 0, 1, 1] = float("nan")
    with pytest.raises(FloatingPointError):
        fft2d(x)
    with finite_checks(False):
        fft2d(x)  # guard disabled
    with pytest.raises(FloatingPointError):
        fft2d(x)


def test_degenerate_shape_rejected():
    with pytest.raises(ValueError):
        fft2d(torch.zeros(3))


def test_strict_inverse_rejects_non_hermitian():
    spec = ComplexSpectrum(torch.zeros(1, 1, 4, 4), torch.zeros(1, 1, 4, 4))
    spec.imag[0, 0, 1, 2] = 5.0
    with pytest.raises(ValueError):
        ifft2d(spec, strict=True)


def test_plane_shape_mismatch():
    with pytest.raises(ValueError):
        ComplexSpectrum(torch.zeros(2, 2), torch.zeros(2, 3))


def test_elementwise_product_matches_torch_complex():
    g = torch.Generator().manual_seed(0)
    a = torch.randn(3, 5, dtype=torch.complex128, generator=g)
    b = torch.randn(3, 5, dtype=torch.complex128, generator=g)
    got = (ComplexSpectrum.from_complex(a) * ComplexSpectrum.from_complex(b)).to_complex()
    assert torch.allclose(got, a * b)


def test_complex_matmul_matches_torch_complex():
    g = torch.Generator().manual_seed(0)
    a = torch.randn(2, 3, 4, dtype=torch.complex128, generator=g)
    b = torch.randn(2, 4, 5, dtype=torch.complex128, generator=g)
    got = complex_matmul(ComplexSpectrum.from_complex(a), ComplexSpectrum.from_complex(b)).to_complex()
    assert torch.allclose(got, a @ b)


def test_complex_matmul_inner_dim_error():
    a = ComplexSpectrum(torch.zeros(2, 3), torch.zeros(2, 3))
    with pytest.raises(ValueError):
        complex_matmul(a, a)


@given(st.integers(0, 2**16))
def test_split_softmax_rows_sum_to_one(seed):
    g = torch.Generator().manual_seed(seed)
    X = ComplexSpectrum(torch.randn(3, 4, 6, generator=g), torch.randn(3, 4, 6, generator=g))
    out = complex_softmax(X, policy="split")
    assert torch.allclose(out.real.sum(-1), torch.ones(3, 4))
    assert torch.allclose(out.imag.sum(-1), torch.ones(3, 4))


@given(st.integers(0, 2**16))
def test_magnitude_softmax_keeps_phase(seed):
    g = torch.Generator().manual_seed(seed)
    z = torch.randn(4, 7, dtype=torch.complex128, generator=g)
    out = complex_softmax(ComplexSpectrum.from_complex(z), policy="magnitude").to_complex()
    assert torch.allclose(out.abs().sum(-1), torch.ones(4, dtype=torch.float64))
    assert torch.allclose(torch.angle(out), torch.angle(z))


def test_magnitude_softmax_zero_entry():
    X = ComplexSpectrum(torch.tensor([[0.0, 1.0]]), torch.tensor([[0.0, 0.0]]))
    out = complex_softmax(X, policy="magnitude")
    e = math.e
    assert torch.allclose(out.real, torch.tensor([[1 / (1 + e), e / (1 + e)]]))
    assert torch.equal(out.imag, torch.zeros(1, 2))


def test_unknown_softmax_policy():
    X = ComplexSpectrum(torch.zeros(2), torch.zeros(2))
    with pytest.raises(ValueError):
        complex_softmax(X, policy="polar")


def test_magnitude_gradient_finite_at_zero():
    real = torch.zeros(3, requires_grad=True)
    imag = torch.zeros(3, requires_grad=True)
    magnitude(ComplexSpectrum(real, imag)).sum().backward()
    assert torch.isfinite(real.grad).all() and torch.isfinite(imag.grad).all()
