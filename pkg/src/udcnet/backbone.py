"""Encoders that expose the stride-4/8/16/32 feature pyramid.

Pretrained weights are only ever read from a local path; nothing is
downloaded.
"""
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import torch
import torch.nn as nn

from .layers import ConvBNReLU

RESNET50_CHANNELS = (256, 512, 1024, 2048)
PVT_V2_B2_CHANNELS = (64, 128, 320, 512)


class FeaturePyramid(NamedTuple):
    f2: torch.Tensor
    f3: torch.Tensor
    f4: torch.Tensor
    f5: torch.Tensor


def check_input(image: torch.Tensor):
    if image.dim() != 4 or image.shape[1] != 3:
        raise ValueError(f"expected an image batch [B, 3, H, W], got {tuple(image.shape)}")
    h, w = image.shape[-2:]
    if h % 32 or w % 32:
        raise ValueError(f"input height and width must be divisible by 32, got {h}x{w}")


def _load_state(path, module: nn.Module, strict=False):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"backbone weights not found: {path}")
    state = torch.load(path, map_location="cpu", weights_only=True)
    if isinstance(state, dict) and "state_dict" in state:
        state = state["state_dict"]
    missing, unexpected = module.load_state_dict(state, strict=strict)
    return missing, unexpected


class ToyBackbone(nn.Module):
    """Five stride-2 conv-BN-ReLU stages; the first (stride 2) stage is not exposed."""

    def __init__(self, channels: Sequence[int] = (16, 32, 64, 128)):
        super().__init__()
        self.channels = tuple(channels)
        widths = (max(channels[0] // 2, 1),) + self.channels
        stages = [ConvBNReLU(3, widths[0], 3, stride=2)]
        for a, b in zip(widths, widths[1:]):
            stages.append(ConvBNReLU(a, b, 3, stride=2))
        self.stages = nn.ModuleList(stages)

    def forward(self, image) -> FeaturePyramid:
        check_input(image)
        feats = []
        x = image
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return FeaturePyramid(*feats[1:])


class ResNet50Backbone(nn.Module):
    channels = RESNET50_CHANNELS

    def __init__(self, weights: Optional[str] = None):
        super().__init__()
        from torchvision.models import resnet50

        net = resnet50(weights=None)
        if weights:
            _load_state(weights, net)
        self.stem = nn.Sequential(net.conv1, net.bn1, net.relu, net.maxpool)
        self.layer1, self.layer2, self.layer3, self.layer4 = net.layer1, net.layer2, net.layer3, net.layer4

    def forward(self, image) -> FeaturePyramid:
        check_input(image)
        x = self.stem(image)
        f2 = self.layer1(x)
        f3 = self.layer2(f2)
        f4 = self.layer3(f3)
        return FeaturePyramid(f2, f3, f4, self.layer4(f4))


class PVTv2Backbone(nn.Module):
    """PVTv2-B2 through timm (optional dependency)."""

    channels = PVT_V2_B2_CHANNELS

    def __init__(self, weights: Optional[str] = None, variant: str = "pvt_v2_b2"):
        super().__init__()
        try:
            import timm
        except ImportError as exc:  # pragma: no cover - depends on the environment
            raise ImportError("the PVTv2 backbone needs timm: pip install 'udcnet[pvt]'") from exc
        self.net = timm.create_model(variant, pretrained=False, features_only=True, out_indices=(0, 1, 2, 3))
        self.channels = tuple(self.net.feature_info.channels())
        if weights:
            _load_state(weights, self.net)

    def forward(self, image) -> FeaturePyramid:
        check_input(image)
        return FeaturePyramid(*self.net(image))


def build_backbone(kind: str, weights: Optional[str] = None, toy_channels=(16, 32, 64, 128)) -> nn.Module:
    if kind == "toy":
        return ToyBackbone(toy_channels)
    if kind == "resnet50":
        return ResNet50Backbone(weights)
    if kind == "pvt_v2_b2":
        return PVTv2Backbone(weights)
    raise ValueError(f"unknown backbone {kind!r}")
