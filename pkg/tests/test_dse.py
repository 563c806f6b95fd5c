import pytest
import torch

from udcnet.config import DSEConfig
from udcnet.dse import DSE, PlainHead


def test_output_is_single_channel_logit_map():
    torch.manual_seed(0)
    dse = DSE(16, 8, DSEConfig(channels=0)).eval()
    out = dse(torch.randn(2, 16, 6, 6), torch.randn(2, 8, 6, 6))
    assert out.shape == (2, 1, 6, 6)
    assert torch.isfinite(out).all()


@pytest.mark.parametrize("dilations", [[1], [3, 6, 12, 18], [1, 2, 4, 8, 16]])
def test_branch_count(dilations):
    dse = DSE(4, 4, DSEConfig(dilations=dilations, channels=0))
    outs = dse.branches(torch.randn(1, 4, 5, 5))
    assert dse.n_branches == len(dilations) + 2 == len(outs)


def test_dense_chaining():
    # with the point branch zeroed, the first atrous branch sees x alone and the
    # second sees x + first output
    torch.manual_seed(0)
    dse = DSE(4, 4, DSEConfig(dilations=[1, 2], channels=0)).eval()
    seen = []
    for conv in dse.atrous:
        conv.register_forward_hook(lambda m, inp, out: seen.append((inp[0].clone(), out.clone())))
    x = torch.randn(1, 4, 6, 6)
    with torch.no_grad():
        outs = dse.branches(x)
    assert torch.allclose(seen[0][0], x + outs[0])
    assert torch.allclose(seen[1][0], x + outs[0] + outs[1])


def test_width_defaults_to_decoder_channels():
    assert DSE(4, 8, DSEConfig(channels=0)).point[0].out_channels == 8
    assert DSE(4, 8, DSEConfig(channels=16)).point[0].out_channels == 16


def test_resolution_mismatch():
    dse = DSE(4, 4, DSEConfig(channels=0))
    with pytest.raises(ValueError):
        dse(torch.randn(1, 4, 6, 6), torch.randn(1, 4, 5, 6))


def test_trains_with_batch_size_one():
    dse = DSE(4, 4, DSEConfig(channels=0)).train()
    dse(torch.randn(1, 4, 4, 4), torch.randn(1, 4, 4, 4)).sum().backward()


def test_plain_head():
    assert PlainHead(8)(None, torch.randn(1, 8, 3, 3)).shape == (1, 1, 3, 3)


def test_invalid_dilations_rejected():
    from udcnet.config import ConfigError

    for bad in ([], [3, 3], [0, 2], [6, 3]):
        with pytest.raises(ConfigError):
            DSEConfig(dilations=bad).validate()
