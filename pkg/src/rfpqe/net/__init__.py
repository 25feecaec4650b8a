from .modules import Conv2d, Module
from .qenet import IQE, PRESETS, STFF, AdaBlock, IqeConfig, MaskNet, NetworkConfig, QENet
from .weights import WeightStore, load_weights, save_weights

__all__ = [
    "IQE",
    "PRESETS",
    "STFF",
    "AdaBlock",
    "Conv2d",
    "IqeConfig",
    "MaskNet",
    "Module",
    "NetworkConfig",
    "QENet",
    "WeightStore",
    "load_weights",
    "save_weights",
]
