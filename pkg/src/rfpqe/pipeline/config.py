"""JSON configuration files for degradation and training. Unknown keys are rejected."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TypeVar

from ..errors import ConfigurationError
from ..freqloss import FftLossConfig
from ..net.qenet import PRESETS, IqeConfig, NetworkConfig
from ..rfp import TrackMode

T = TypeVar("T")


def _build(cls: type[T], data: dict[str, Any], where: str) -> T:
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigurationError(f"{where}: {exc}") from None


@dataclass
class DegradeConfig:
    block_size: int = 8
    quality_cycle: list[float] = field(default_factory=lambda: [4.0, 16.0, 12.0, 16.0])
    blur_sigma: float = 0.0
    noise_sigma: float = 0.0
    qp_scale: float = 2.0
    seed: int = 0

    def __post_init__(self):
        self.quality_cycle = [float(q) for q in self.quality_cycle]
        if self.block_size < 1:
            raise ConfigurationError("block_size must be positive")
        if not self.quality_cycle or any(q < 0 for q in self.quality_cycle):
            raise ConfigurationError("quality_cycle must be a non-empty list of non-negative steps")
        if self.blur_sigma < 0 or self.noise_sigma < 0 or self.qp_scale < 0:
            raise ConfigurationError("blur_sigma, noise_sigma and qp_scale must be non-negative")

    @classmethod
    def from_dict(cls, data: dict) -> "DegradeConfig":
        return _build(cls, data, "degrade config")


@dataclass
class LossSpec:
    spatial: str = "L1"
    fft: bool = True
    lam: float = 1.0
    w_fft: float = 1.0
    fft_norm: str = "L1"

    def __post_init__(self):
        if self.spatial not in ("L1", "L2"):
            raise ConfigurationError(f"spatial loss must be L1 or L2, got {self.spatial!r}")
        if self.w_fft < 0:
            raise ConfigurationError("w_fft must be non-negative")
        self.fft_config()

    def fft_config(self) -> FftLossConfig:
        return FftLossConfig(lam=self.lam, norm_mode=self.fft_norm)


@dataclass
class TrainConfig:
    dataset: str = ""
    radius: int = 2
    track: str = "fixed-qp"
    rfp: bool = True
    preset: str = "shallow"
    iqe: dict = field(default_factory=dict)
    loss: LossSpec = field(default_factory=LossSpec)
    base_lr: float = 1e-4
    iterations: int = 5000
    batch_size: int = 8
    patch_size: int = 48
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.loss, dict):
            self.loss = _build(LossSpec, self.loss, "loss")
        try:
            TrackMode(self.track)
        except ValueError:
            raise ConfigurationError(f"unknown track {self.track!r}") from None
        if self.preset not in PRESETS:
            raise ConfigurationError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        for name in ("radius", "iterations", "batch_size", "patch_size"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.base_lr <= 0:
            raise ConfigurationError("base_lr must be positive")
        allowed = {f.name for f in dataclasses.fields(IqeConfig)} - {"in_channels", "out_channels"}
        unknown = sorted(set(self.iqe) - allowed)
        if unknown:
            raise ConfigurationError(f"iqe: unknown keys {unknown}")
        s = self.network().iqe.downsample
        if self.patch_size % s:
            raise ConfigurationError(f"patch_size {self.patch_size} not divisible by downsample factor {s}")

    def network(self, channels: int = 1) -> NetworkConfig:
        return NetworkConfig.from_preset(self.preset, radius=self.radius, channels=channels, **self.iqe)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return _build(cls, data, "train config")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def load_config(path: str | Path, cls: type[T]) -> T:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return cls.from_dict(data)
