"""UDCNet: frequency-spatial salient object detection for remote-sensing images."""
from .config import RunConfig, ModelConfig, TrainConfig, load_config, dump_config, toy_profile
from .model import UDCNet, ModelOutput, count_params_flops, load_checkpoint, save_checkpoint

__all__ = [
    "RunConfig",
    "ModelConfig",
    "TrainConfig",
    "load_config",
    "dump_config",
    "toy_profile",
    "UDCNet",
    "ModelOutput",
    "count_params_flops",
    "load_checkpoint",
    "save_checkpoint",
]
__version__ = "0.1.0"
