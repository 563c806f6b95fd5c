"""Dense semantic excavation over the top pyramid level."""
import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import DSEConfig
from .layers import ConvBNReLU, ConvStack


class DSE(nn.Module):
    """Densely chained atrous context producing the one-channel coarse map R6.

    Each atrous branch sees the reduced input plus the running sum of every
    earlier branch output, so small receptive fields feed the larger ones.
    The result is a logit map (no activation).
    """

    def __init__(self, in_ch, channels, cfg: DSEConfig = None):
        super().__init__()
        cfg = cfg or DSEConfig()
        width = cfg.channels or channels
        self.dilations = list(cfg.dilations)
        self.reduce = ConvBNReLU(in_ch + channels, width, 1)
        self.point = ConvBNReLU(width, width, 1)
        self.atrous = nn.ModuleList(ConvBNReLU(width, width, 3, dilation=d) for d in self.dilations)
        # no BatchNorm on the 1x1 pooled descriptor: batch-size-1 training would fail
        self.pooled = nn.Sequential(nn.Conv2d(2 * width, width, 1), nn.ReLU(inplace=True))
        n_branches = len(self.dilations) + 2
        self.trunk = nn.Sequential(
            ConvBNReLU(n_branches * width, 2 * width, 3),
            ConvBNReLU(2 * width, width, 3),
            ConvBNReLU(width, width, 3),
        )
        self.shortcut = ConvStack(in_ch + channels, width)
        self.head = nn.Sequential(ConvBNReLU(width, width, 1), nn.Conv2d(width, 1, 1))

    @property
    def n_branches(self):
        return len(self.dilations) + 2

    def branches(self, x):
        outs = [self.point(x)]
        running = outs[0]
        for conv in self.atrous:
            y = conv(x + running)
            outs.append(y)
            running = running + y
        h, w = x.shape[-2:]
        desc = torch.cat([F.adaptive_avg_pool2d(x, 1), F.adaptive_max_pool2d(x, 1)], dim=1)
        outs.append(self.pooled(desc).expand(-1, -1, h, w))
        return outs

    def forward(self, f5_o, f5_h):
        if f5_o.shape[-2:] != f5_h.shape[-2:]:
            raise ValueError(
                f"DSE inputs differ in resolution: {tuple(f5_o.shape[-2:])} vs {tuple(f5_h.shape[-2:])}"
            )
        cat = torch.cat([f5_o, f5_h], dim=1)
        r_in1 = torch.cat(self.branches(self.reduce(cat)), dim=1)
        return self.head(self.trunk(r_in1) + self.shortcut(cat))


class PlainHead(nn.Module):
    """Ablation stand-in for DSE: a 1x1 logit head on F5_h."""

    def __init__(self, channels):
        super().__init__()
        self.head = nn.Conv2d(channels, 1, 1)

    def forward(self, f5_o, f5_h):
        return self.head(f5_h)
