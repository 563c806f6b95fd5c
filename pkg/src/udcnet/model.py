"""UDCNet assembly, capacity accounting and checkpoints."""
import copy
import json
import math
from dataclasses import dataclass
from typing import Dict

import torch
import torch.nn as nn
from torch.utils.flop_counter import FlopCounterMode

from . import config as C
from .backbone import build_backbone
from .djo import DJOLevel, SimpleLevel
from .dse import DSE, PlainHead
from .fsdt import FSDTBlock, LateralReduction
from .layers import upsample_to

LEVELS = (2, 3, 4, 5)
STRIDES = {2: 4, 3: 8, 4: 16, 5: 32}
CHECKPOINT_VERSION = 1


@dataclass
class ModelOutput:
    sal_logits: Dict[int, torch.Tensor]
    edge_logits: Dict[int, torch.Tensor]
    r6: torch.Tensor

    def prediction(self, size=None):
        """Sigmoid of the level-2 saliency logits, optionally resized."""
        logits = self.sal_logits[2]
        if size is not None:
            logits = upsample_to(logits, size)
        return torch.sigmoid(logits)


class UDCNet(nn.Module):
    def __init__(self, cfg: C.ModelConfig = None):
        super().__init__()
        cfg = copy.deepcopy(cfg or C.ModelConfig())
        cfg.validate()
        self.cfg = cfg
        ch = cfg.channels
        self.backbone = build_backbone(cfg.backbone, cfg.backbone_weights, cfg.toy_channels)
        enc = dict(zip(LEVELS, self.backbone.channels))

        blocks = {}
        for lvl in LEVELS:
            has_next = lvl < 5
            if cfg.use_fsdt:
                blocks[str(lvl)] = FSDTBlock(enc[lvl], ch, has_next, cfg.fsdt)
            else:
                blocks[str(lvl)] = LateralReduction(enc[lvl], ch, has_next)
        self.fsdt = nn.ModuleDict(blocks)
        self.dse = DSE(enc[5], ch, cfg.dse) if cfg.use_dse else PlainHead(ch)

        levels = {}
        for lvl in LEVELS:
            side = cfg.image_size // STRIDES[lvl]
            if cfg.use_djo:
                levels[str(lvl)] = DJOLevel(ch, (side, side), cfg.djo.freq_path)
            else:
                levels[str(lvl)] = SimpleLevel(ch)
        self.djo = nn.ModuleDict(levels)

    def forward(self, image) -> ModelOutput:
        pyr = self.backbone(image)
        f_o = dict(zip(LEVELS, pyr))
        f_h = {}
        nxt = None
        for lvl in reversed(LEVELS):
            nxt = self.fsdt[str(lvl)](f_o[lvl], nxt)
            f_h[lvl] = nxt
        r6 = self.dse(f_o[5], f_h[5])

        sal, edge = {}, {}
        for lvl in reversed(LEVELS):
            if lvl == 5:
                guidance = [r6]
            else:
                guidance = [sal[j] for j in range(lvl + 1, min(lvl + 3, 5) + 1)]
            out = self.djo[str(lvl)](f_h[lvl], guidance)
            sal[lvl], edge[lvl] = out.sal_logits, out.edge_logits
        return ModelOutput(sal, edge, r6)


def count_params(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def fft_flops(x_shape, dim, *args, out_shape=None, **kwargs) -> int:
    """5 n log2(n) real flops per length-n complex 1-D transform (radix-2 count)."""
    total = 0
    numel = math.prod(x_shape)
    for d in dim:
        n = x_shape[d]
        if n > 1:
            total += int(5 * numel * math.log2(n))
    return total


def count_macs(model: nn.Module, image_size: int) -> int:
    """Multiply-accumulate count of one forward pass at ``image_size``.

    Convolutions, (batched) matrix products and FFTs are counted per aten op;
    the complex products of the frequency attention appear as their real
    matmuls. Reported as flops / 2.
    """
    model = model.eval()
    x = torch.zeros(1, 3, image_size, image_size)
    mapping = {torch.ops.aten._fft_c2c: fft_flops, torch.ops.aten._fft_r2c: fft_flops}
    with torch.no_grad(), FlopCounterMode(display=False, custom_mapping=mapping) as counter:
        model(x)
    return counter.get_total_flops() // 2


def count_params_flops(cfg: C.ModelConfig, image_size: int = 352):
    """(parameter count, MACs at ``image_size``) for a freshly built model."""
    cfg = copy.deepcopy(cfg)
    cfg.image_size = image_size
    torch.manual_seed(0)
    model = UDCNet(cfg)
    return count_params(model), count_macs(model, image_size)


def save_checkpoint(path, model: UDCNet, extra: dict = None):
    torch.save(
        {
            "version": CHECKPOINT_VERSION,
            "config": C.to_dict(model.cfg),
            "state_dict": model.state_dict(),
            "extra": extra or {},
        },
        path,
    )


class CheckpointError(ValueError):
    pass


def _model_config_from_dict(data) -> C.ModelConfig:
    return C.from_dict({"model": data}).model


def load_checkpoint(path, cfg: C.ModelConfig = None):
    """Load a checkpoint; if ``cfg`` is given it must match the stored config."""
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if blob.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {blob.get('version')!r}")
    stored = blob["config"]
    if cfg is not None:
        wanted = C.to_dict(cfg)
        # weight paths are provenance only; they do not change the architecture
        a = {k: v for k, v in stored.items() if k != "backbone_weights"}
        b = {k: v for k, v in wanted.items() if k != "backbone_weights"}
        if a != b:
            diff = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
            raise CheckpointError(f"checkpoint config mismatch in {diff}: {json.dumps({k: a.get(k) for k in diff})}")
    mcfg = _model_config_from_dict(stored)
    mcfg.backbone_weights = None
    model = UDCNet(mcfg)
    model.load_state_dict(blob["state_dict"])
    return model, blob.get("extra", {})
