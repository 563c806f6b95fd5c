"""Parameter and multiply-accumulate counts for a few model widths at 352x352.

Builds the ResNet50 variant without pretrained weights, so no download is needed.
Run: python3 demos/capacity.py
"""
from udcnet import config as C
from udcnet.model import count_params_flops

for channels in (64, 128):
    cfg = C.ModelConfig(channels=channels)
    params, macs = count_params_flops(cfg, 352)
    print(f"resnet50, {channels:3d} channels: {params / 1e6:6.2f}M params, {macs / 1e9:6.2f}G MACs")

toy = C.toy_profile().model
params, macs = count_params_flops(toy, toy.image_size)
print(f"toy profile at {toy.image_size}: {params / 1e6:.2f}M params, {macs / 1e9:.3f}G MACs")
