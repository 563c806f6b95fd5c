"""Configuration dataclasses and (de)serialization.

Config files are JSON or YAML. :func:`dump_config` always emits canonical
JSON (sorted keys, two-space indent) so snapshots can be byte-compared.
"""
import dataclasses
import json
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import yaml

BACKBONES = ("toy", "resnet50", "pvt_v2_b2")
CDFFN_MODES = ("literal", "phase_preserving")
SOFTMAX_POLICIES = ("split", "magnitude")
FREQ_PATH_MODES = ("filter", "literal")


class ConfigError(ValueError):
    pass


@dataclass
class FSDTConfig:
    dw_kernels: List[int] = field(default_factory=lambda: [3, 5, 7])
    le_dilations: List[int] = field(default_factory=lambda: [1, 2, 3])
    cdffn_global_mode: str = "phase_preserving"
    complex_softmax: str = "split"
    heads: int = 1
    ffn_expansion: int = 6
    qk_norm: bool = True

    def validate(self):
        if any(k < 3 or k % 2 == 0 for k in self.dw_kernels):
            raise ConfigError(f"dw_kernels must be odd and >= 3, got {self.dw_kernels}")
        if any(d < 1 for d in self.le_dilations):
            raise ConfigError(f"le_dilations must be positive, got {self.le_dilations}")
        if self.cdffn_global_mode not in CDFFN_MODES:
            raise ConfigError(f"cdffn_global_mode must be one of {CDFFN_MODES}")
        if self.complex_softmax not in SOFTMAX_POLICIES:
            raise ConfigError(f"complex_softmax must be one of {SOFTMAX_POLICIES}")
        if self.heads < 1 or self.ffn_expansion < 1:
            raise ConfigError("heads and ffn_expansion must be >= 1")


@dataclass
class DSEConfig:
    dilations: List[int] = field(default_factory=lambda: [3, 6, 12, 18])
    # width of the atrous branches; 0 means "same as the decoder width"
    channels: int = 256

    def validate(self):
        d = self.dilations
        if not d or any(x < 1 for x in d) or any(b <= a for a, b in zip(d, d[1:])):
            raise ConfigError(f"DSE dilations must be positive and strictly increasing, got {d}")
        if self.channels < 0:
            raise ConfigError("DSE channels must be >= 0")


@dataclass
class DJOConfig:
    freq_path: str = "filter"

    def validate(self):
        if self.freq_path not in FREQ_PATH_MODES:
            raise ConfigError(f"freq_path must be one of {FREQ_PATH_MODES}")


@dataclass
class ModelConfig:
    backbone: str = "resnet50"
    backbone_weights: Optional[str] = None
    toy_channels: List[int] = field(default_factory=lambda: [16, 32, 64, 128])
    channels: int = 128
    image_size: int = 352
    use_fsdt: bool = True
    use_dse: bool = True
    use_djo: bool = True
    fsdt: FSDTConfig = field(default_factory=FSDTConfig)
    dse: DSEConfig = field(default_factory=DSEConfig)
    djo: DJOConfig = field(default_factory=DJOConfig)

    def validate(self):
        if self.backbone not in BACKBONES:
            raise ConfigError(f"backbone must be one of {BACKBONES}, got {self.backbone!r}")
        if self.channels <= 0:
            raise ConfigError("channels must be positive")
        if self.image_size <= 0 or self.image_size % 32:
            raise ConfigError(f"image_size must be a positive multiple of 32, got {self.image_size}")
        if len(self.toy_channels) != 4 or any(c <= 0 for c in self.toy_channels):
            raise ConfigError("toy_channels needs four positive widths")
        self.fsdt.validate()
        self.dse.validate()
        self.djo.validate()


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 1e-4
    lr_decay: float = 0.1
    decay_every: int = 60
    epochs: int = 180
    batch_size: int = 40
    max_steps: int = 0  # 0 = run all epochs
    loss_window: int = 15
    augment: bool = True
    num_workers: int = 0
    log_every: int = 10

    def validate(self):
        if self.optimizer != "adam":
            raise ConfigError("only the adam optimizer is supported")
        if self.lr <= 0 or not 0 < self.lr_decay <= 1:
            raise ConfigError("lr must be > 0 and lr_decay in (0, 1]")
        if min(self.decay_every, self.epochs, self.batch_size) <= 0:
            raise ConfigError("decay_every, epochs and batch_size must be positive")
        if self.max_steps < 0 or self.num_workers < 0 or self.log_every <= 0:
            raise ConfigError("max_steps/num_workers must be >= 0, log_every > 0")
        if self.loss_window < 1 or self.loss_window % 2 == 0:
            raise ConfigError("loss_window must be a positive odd integer")


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    dataset_root: Optional[str] = None
    train_split: str = "train"
    test_split: str = "test"
    output_dir: str = "runs/udcnet"

    def validate(self):
        self.model.validate()
        self.train.validate()
        return self


def toy_profile() -> RunConfig:
    """Laptop-scale defaults: toy backbone, 32 channels, 64x64 inputs."""
    cfg = RunConfig()
    cfg.model.backbone = "toy"
    cfg.model.channels = 32
    cfg.model.dse.channels = 0
    cfg.model.image_size = 64
    cfg.train.batch_size = 4
    return cfg


def to_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def _build(cls, data: dict, path: str = ""):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown keys {sorted(unknown)}")
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for name, value in data.items():
        sub = _NESTED.get((cls, name))
        kwargs[name] = _build(sub, value, f"{path}{name}.") if sub else _coerce(hints[name], value, path + name)
    return cls(**kwargs)


def _coerce(hint, value, name):
    """Check ``value`` against a field annotation, widening int to float and
    parsing numeric strings (YAML 1.1 reads ``1e-4`` as a string)."""
    if typing.get_origin(hint) is typing.Union:
        if value is None:
            return None
        hint = next(a for a in typing.get_args(hint) if a is not type(None))
    if typing.get_origin(hint) is list:
        if not isinstance(value, list):
            raise ConfigError(f"{name}: expected a list, got {value!r}")
        (item,) = typing.get_args(hint)
        return [_coerce(item, v, name) for v in value]
    if hint is float and isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    if hint is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, hint) or (hint is int and isinstance(value, bool)):
        raise ConfigError(f"{name}: expected {hint.__name__}, got {value!r}")
    return value


_NESTED = {
    (RunConfig, "model"): ModelConfig,
    (RunConfig, "train"): TrainConfig,
    (ModelConfig, "fsdt"): FSDTConfig,
    (ModelConfig, "dse"): DSEConfig,
    (ModelConfig, "djo"): DJOConfig,
}


def from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data).validate()


def dump_config(cfg) -> str:
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n"


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    data = yaml.safe_load(text) or {}
    return from_dict(data)


def _parse_scalar(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply ``dotted.key=value`` overrides; values are parsed as YAML scalars."""
    data = to_dict(cfg)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        node = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"override {key!r}: {part!r} is not a config section")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"override {key!r}: unknown key")
        node[parts[-1]] = _parse_scalar(raw)
    return from_dict(data)
