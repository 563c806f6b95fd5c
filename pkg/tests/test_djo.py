import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from udcnet.djo import (
    DJOLevel,
    GEF,
    SaliencyBranch,
    SimpleLevel,
    SpectralFilter,
    gradient_enhance,
    reverse_attention,
    sf_multiplier,
    sf_reverse_attention,
)


def test_reverse_attention_values():
    x = torch.tensor([0.0, 100.0, -100.0])
    assert torch.allclose(reverse_attention(x), torch.tensor([0.5, 0.0, 1.0]))


def test_zero_guidance_keeps_features():
    f = torch.randn(1, 4, 8, 8)
    assert torch.allclose(sf_reverse_attention(f, torch.zeros(1, 1, 8, 8)), f, atol=1e-6)


@given(st.integers(0, 2**16))
def test_multiplier_range(seed):
    g = torch.randn(1, 1, 6, 6, generator=torch.Generator().manual_seed(seed)) * 5
    m = sf_multiplier(g)
    assert (m >= 0).all() and (m <= 1.5 + 1e-6).all()


def _gef_oracle(x, lam):
    h, w = x.shape
    out = np.empty_like(x)
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    a = min(max(i + di, 0), h - 1)
                    b = min(max(j + dj, 0), w - 1)
                    acc += x[i, j] - x[a, b]
            out[i, j] = x[i, j] + lam * acc / 9
    return out


@given(st.integers(0, 2**16), st.floats(-2, 2))
def test_gradient_enhance_matches_oracle(seed, lam):
    x = np.random.default_rng(seed).standard_normal((5, 7))
    got = gradient_enhance(torch.as_tensor(x)[None, None], lam)[0, 0].numpy()
    assert np.allclose(got, _gef_oracle(x, lam))


@given(st.floats(-10, 10))
def test_gef_constant_is_exact(value):
    x = torch.full((1, 1, 5, 5), value)
    assert torch.equal(GEF()(x), x)


def test_spectral_filter_starts_as_identity():
    f = SpectralFilter(3, (8, 8))
    x = torch.randn(2, 3, 8, 8, dtype=torch.float64)
    f = f.double()
    assert torch.allclose(f(x), x, atol=1e-10)


def test_spectral_filter_resizes():
    f = SpectralFilter(3, (8, 8))
    x = torch.randn(1, 3, 12, 10)
    assert torch.allclose(f(x), x, atol=1e-5)


@pytest.mark.parametrize("path", ["filter", "literal"])
def test_saliency_branch_shapes(path):
    b = SaliencyBranch(4, (6, 6), path).eval()
    assert b(torch.randn(1, 4, 6, 6)).shape == (1, 4, 6, 6)


def test_level_outputs_and_residual():
    torch.manual_seed(0)
    lvl = DJOLevel(8, (8, 8)).eval()
    guide = [torch.randn(2, 1, 4, 4), torch.randn(2, 1, 2, 2)]
    out = lvl(torch.randn(2, 8, 8, 8), guide)
    assert out.sal_logits.shape == out.edge_logits.shape == (2, 1, 8, 8)


def test_aggregate_errors():
    with pytest.raises(ValueError):
        DJOLevel.aggregate([], (4, 4))
    with pytest.raises(ValueError):
        DJOLevel.aggregate([torch.zeros(1, 2, 4, 4)], (4, 4))


def test_aggregate_sums_upsampled_maps():
    maps, g = DJOLevel.aggregate([torch.ones(1, 1, 2, 2), 2 * torch.ones(1, 1, 4, 4)], (4, 4))
    assert torch.allclose(g, 3 * torch.ones(1, 1, 4, 4))
    assert len(maps) == 2


def test_simple_level():
    out = SimpleLevel(4)(torch.randn(1, 4, 4, 4), [torch.zeros(1, 1, 2, 2)])
    assert out.sal_logits.shape == (1, 1, 4, 4)
