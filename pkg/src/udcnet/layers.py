"""Small convolutional building blocks reused across the network."""
import torch
import torch.nn as nn
import torch.nn.functional as F


class ConvBNReLU(nn.Sequential):
    def __init__(self, in_ch, out_ch, kernel_size=3, stride=1, dilation=1, relu=True):
        padding = dilation * (kernel_size - 1) // 2
        layers = [
            nn.Conv2d(in_ch, out_ch, kernel_size, stride=stride, padding=padding, dilation=dilation, bias=False),
            nn.BatchNorm2d(out_ch),
        ]
        if relu:
            layers.append(nn.ReLU(inplace=True))
        super().__init__(*layers)


class ConvStack(nn.Sequential):
    """The network's generic "Conv" unit: one 1x1 then two 3x3 conv-BN-ReLU layers."""

    def __init__(self, in_ch, out_ch, mid_ch=None):
        mid_ch = mid_ch or out_ch
        super().__init__(
            ConvBNReLU(in_ch, mid_ch, 1),
            ConvBNReLU(mid_ch, mid_ch, 3),
            ConvBNReLU(mid_ch, out_ch, 3),
        )


def conv1x1(in_ch, out_ch, bias=True):
    return nn.Conv2d(in_ch, out_ch, 1, bias=bias)


class LayerNorm2d(nn.Module):
    """Layer norm across channels at every pixel of a [B, C, H, W] map."""

    def __init__(self, channels, eps=1e-5):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))
        self.eps = eps

    def forward(self, x):
        mu = x.mean(1, keepdim=True)
        var = x.var(1, keepdim=True, unbiased=False)
        x = (x - mu) / torch.sqrt(var + self.eps)
        return x * self.weight[:, None, None] + self.bias[:, None, None]


class DepthwiseSeparableConv(nn.Sequential):
    """k x k depthwise conv followed by a 1x1 pointwise conv."""

    def __init__(self, channels, kernel_size, out_ch=None, dilation=1):
        out_ch = out_ch or channels
        padding = dilation * (kernel_size - 1) // 2
        super().__init__(
            nn.Conv2d(channels, channels, kernel_size, padding=padding, dilation=dilation, groups=channels),
            nn.Conv2d(channels, out_ch, 1),
        )


class ChannelGate(nn.Module):
    def __init__(self, channels, reduction=16):
        super().__init__()
        hidden = max(channels // reduction, 1)
        self.mlp = nn.Sequential(
            nn.Conv2d(channels, hidden, 1, bias=False),
            nn.ReLU(inplace=True),
            nn.Conv2d(hidden, channels, 1, bias=False),
        )

    def forward(self, x):
        avg = self.mlp(F.adaptive_avg_pool2d(x, 1))
        mx = self.mlp(F.adaptive_max_pool2d(x, 1))
        return torch.sigmoid(avg + mx)


class SpatialGate(nn.Module):
    def __init__(self, kernel_size=7):
        super().__init__()
        self.conv = nn.Conv2d(2, 1, kernel_size, padding=kernel_size // 2, bias=False)

    def forward(self, x):
        pooled = torch.cat([x.mean(1, keepdim=True), x.amax(1, keepdim=True)], dim=1)
        return torch.sigmoid(self.conv(pooled))


class SpatialAttention(nn.Module):
    def __init__(self, kernel_size=7):
        super().__init__()
        self.gate = SpatialGate(kernel_size)

    def forward(self, x):
        return x * self.gate(x)


class ResidualChannelSpatialAttention(nn.Module):
    """Channel gate, then spatial gate, with an identity shortcut."""

    def __init__(self, channels, reduction=16, kernel_size=7):
        super().__init__()
        self.channel_gate = ChannelGate(channels, reduction)
        self.spatial_gate = SpatialGate(kernel_size)

    def forward(self, x):
        y = x * self.channel_gate(x)
        y = y * self.spatial_gate(y)
        return y + x


def upsample_to(x, size, mode="bilinear"):
    if tuple(x.shape[-2:]) == tuple(size):
        return x
    if mode == "nearest":
        return F.interpolate(x, size=size, mode=mode)
    return F.interpolate(x, size=size, mode=mode, align_corners=False)
