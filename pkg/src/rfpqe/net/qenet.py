"""Fusion front-end, Ada-WDSR-A blocks and the IQE backbone.

IQE topology (all convolutions 3x3, "same" padding)::

    h = head(feature)
    d = down(pixel_unshuffle(h, s))
    b = body_tail(blocks(d)) + skip_scale * d
    u = pixel_shuffle(up(b), s)
    residual = tail(h + u)

The front-end is a plain concat-and-convolve fusion of the 2R+1 frame stack;
it stands in for a deformable-convolution fusion module.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Mapping

import numpy as np

from ..autograd import ops
from ..autograd.tensor import Tensor
from ..errors import BindingError, ConfigurationError, DimensionError
from .modules import Conv2d, Module


@dataclass(frozen=True)
class IqeConfig:
    n_blocks: int = 30
    width: int = 32
    expansion: int = 4
    downsample: int = 2
    skip_scale: float = 0.2
    reduction: int = 4
    kernel: int = 3
    in_channels: int | None = None  # defaults to width
    out_channels: int = 1

    def __post_init__(self):
        if self.in_channels is None:
            object.__setattr__(self, "in_channels", self.width)
        if self.n_blocks < 1 or self.width < 1 or self.downsample < 1 or self.expansion < 1:
            raise ConfigurationError(f"invalid IQE config: {self}")
        if self.kernel % 2 == 0:
            raise ConfigurationError(f"kernel size must be odd, got {self.kernel}")
        if self.width % self.reduction:
            raise ConfigurationError(f"width {self.width} not divisible by reduction {self.reduction}")

    @property
    def channel_triple(self) -> tuple[int, int, int]:
        return (self.width, self.width * self.expansion, self.width)

    @classmethod
    def shallow(cls, **overrides) -> "IqeConfig":
        return cls(**{"n_blocks": 30, "width": 32, **overrides})

    @classmethod
    def deep(cls, **overrides) -> "IqeConfig":
        return cls(**{"n_blocks": 96, "width": 64, **overrides})

    def param_count(self) -> int:
        """Closed-form number of trainable scalars."""
        k2 = self.kernel * self.kernel
        w, cin, cout = self.width, self.in_channels, self.out_channels
        wide = w * self.expansion
        ws2 = w * self.downsample**2
        red = w // self.reduction

        def conv(a, b):
            return k2 * a * b + b

        block = conv(w, wide) + conv(wide, w) + (w * red + red) + (red * w + w) + 2
        return (
            conv(cin, w)
            + conv(ws2, w)
            + self.n_blocks * block
            + conv(w, w)
            + conv(w, ws2)
            + conv(w, cout)
        )


PRESETS = {
    "shallow": IqeConfig.shallow,
    "deep": IqeConfig.deep,
    "mini": lambda **kw: IqeConfig(**{"n_blocks": 4, "width": 16, **kw}),
}


@dataclass(frozen=True)
class NetworkConfig:
    radius: int = 2
    channels: int = 1
    features: int = 32
    iqe: IqeConfig = field(default_factory=IqeConfig)

    def __post_init__(self):
        if self.radius < 1 or self.channels < 1 or self.features < 1:
            raise ConfigurationError(f"invalid network config: {self}")
        if self.iqe.in_channels != self.features or self.iqe.out_channels != self.channels:
            object.__setattr__(
                self, "iqe", replace(self.iqe, in_channels=self.features, out_channels=self.channels)
            )

    @classmethod
    def from_preset(cls, preset: str, radius: int = 2, channels: int = 1, **iqe_overrides) -> "NetworkConfig":
        if preset not in PRESETS:
            raise ConfigurationError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        iqe = PRESETS[preset](**iqe_overrides)
        return cls(radius=radius, channels=channels, features=iqe.width, iqe=iqe)

    @property
    def stack_channels(self) -> int:
        return (2 * self.radius + 1) * self.channels

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_weights(cls, state: Mapping[str, np.ndarray]) -> "NetworkConfig":
        """Recover the architecture from tensor names and shapes."""
        try:
            stack_c = state["stff.conv1.weight"].shape[1]
            features = state["stff.conv1.weight"].shape[0]
            kernel = state["iqe.head.weight"].shape[2]
            width = state["iqe.head.weight"].shape[0]
            channels = state["iqe.tail.weight"].shape[0]
            ws2 = state["iqe.down.weight"].shape[1]
            wide = state["iqe.blocks.0.expand.weight"].shape[0]
            red = state["iqe.blocks.0.ca1.weight"].shape[0]
        except (KeyError, IndexError) as exc:
            raise BindingError(f"weights do not describe an enhancement network: {exc}") from None
        n_blocks = 0
        while f"iqe.blocks.{n_blocks}.alpha" in state:
            n_blocks += 1
        s = int(round((ws2 / width) ** 0.5))
        if stack_c % channels or (stack_c // channels) % 2 == 0 or s * s * width != ws2:
            raise BindingError("inconsistent tensor shapes in weight store")
        iqe = IqeConfig(
            n_blocks=n_blocks, width=width, expansion=wide // width, downsample=s,
            reduction=width // red, kernel=kernel, in_channels=features, out_channels=channels,
        )
        return cls(radius=(stack_c // channels - 1) // 2, channels=channels, features=features, iqe=iqe)


class AdaBlock(Module):
    """Wide-activation residual block: ``alpha*x + beta*CA(reduce(relu(expand(x))))``."""

    def __init__(self, width: int, expansion: int, reduction: int, kernel: int, rng, dtype=np.float32):
        red = width // reduction
        self.expand = Conv2d(width, width * expansion, kernel, rng, dtype)
        self.reduce = Conv2d(width * expansion, width, kernel, rng, dtype)
        self.ca1 = Conv2d(width, red, 1, rng, dtype)
        self.ca2 = Conv2d(red, width, 1, rng, dtype)
        self.alpha = Tensor(np.array(1.0, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.array(0.2, dtype=dtype), requires_grad=True)

    def body(self, x: Tensor) -> Tensor:
        y = self.reduce(ops.relu(self.expand(x)))
        return ops.channel_attention(y, self.ca1.weight, self.ca1.bias, self.ca2.weight, self.ca2.bias)

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.expand.weight.shape[1]:
            raise DimensionError(f"AdaBlock expects {self.expand.weight.shape[1]} channels, got {x.shape}")
        return ops.add(ops.scale_by_learnable(x, self.alpha), ops.scale_by_learnable(self.body(x), self.beta))


class IQE(Module):
    def __init__(self, cfg: IqeConfig, rng, dtype=np.float32):
        self._cfg = cfg
        w, k, s = cfg.width, cfg.kernel, cfg.downsample
        self.head = Conv2d(cfg.in_channels, w, k, rng, dtype)
        self.down = Conv2d(w * s * s, w, k, rng, dtype)
        self.blocks = [AdaBlock(w, cfg.expansion, cfg.reduction, k, rng, dtype) for _ in range(cfg.n_blocks)]
        self.body_tail = Conv2d(w, w, k, rng, dtype)
        self.up = Conv2d(w, w * s * s, k, rng, dtype)
        self.tail = Conv2d(w, cfg.out_channels, k, rng, dtype)

    @property
    def cfg(self) -> IqeConfig:
        return self._cfg

    def __call__(self, feature: Tensor) -> Tensor:
        s = self._cfg.downsample
        if feature.ndim != 4 or feature.shape[2] % s or feature.shape[3] % s:
            raise ConfigurationError(f"IQE input {feature.shape} not divisible by downsample factor {s}")
        h = self.head(feature)
        d = self.down(ops.pixel_unshuffle(h, s))
        b = d
        for block in self.blocks:
            b = block(b)
        b = ops.add(self.body_tail(b), ops.mul(d, self._cfg.skip_scale))
        u = ops.pixel_shuffle(self.up(b), s)
        return self.tail(ops.add(h, u))


class STFF(Module):
    """Concat-and-convolve fusion of a (2R+1)-frame stack."""

    def __init__(self, stack_channels: int, features: int, kernel: int, rng, dtype=np.float32):
        self.conv1 = Conv2d(stack_channels, features, kernel, rng, dtype)
        self.conv2 = Conv2d(features, features, kernel, rng, dtype)

    def __call__(self, stack: Tensor) -> Tensor:
        if stack.ndim != 4 or stack.shape[1] != self.conv1.weight.shape[1]:
            raise DimensionError(f"STFF expects {self.conv1.weight.shape[1]} channels, got {stack.shape}")
        return ops.relu(self.conv2(ops.relu(self.conv1(stack))))


class QENet(Module):
    """Frame stack (N, (2R+1)C, H, W) -> enhanced target frame (N, C, H, W)."""

    def __init__(self, cfg: NetworkConfig, seed: int = 0, dtype=np.float32):
        self._cfg = cfg
        rng = np.random.default_rng(seed)
        self.stff = STFF(cfg.stack_channels, cfg.features, cfg.iqe.kernel, rng, dtype)
        self.iqe = IQE(cfg.iqe, rng, dtype)

    @property
    def cfg(self) -> NetworkConfig:
        return self._cfg

    def residual(self, stack: Tensor) -> Tensor:
        return self.iqe(self.stff(stack))

    def __call__(self, stack: Tensor) -> Tensor:
        c, r = self._cfg.channels, self._cfg.radius
        target = ops.slice_channels(stack, r * c, (r + 1) * c)
        return ops.add(target, self.residual(stack))


class MaskNet(Module):
    """Three 3x3 convolutions over concat(x_t, y1, y2), ending in a sigmoid."""

    def __init__(self, channels: int = 1, hidden: int = 32, seed: int = 0, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.conv1 = Conv2d(3 * channels, hidden, 3, rng, dtype)
        self.conv2 = Conv2d(hidden, hidden, 3, rng, dtype)
        self.conv3 = Conv2d(hidden, 1, 3, rng, dtype)

    @classmethod
    def from_weights(cls, state: Mapping[str, np.ndarray]) -> "MaskNet":
        try:
            hidden, three_c = state["conv1.weight"].shape[:2]
        except KeyError:
            raise BindingError("mask weights lack conv1.weight") from None
        net = cls(channels=three_c // 3, hidden=hidden)
        net.load_state_dict(state)
        return net

    def __call__(self, x_t: Tensor, y1: Tensor, y2: Tensor) -> Tensor:
        if not (x_t.shape == y1.shape == y2.shape):
            raise DimensionError(f"mask net inputs differ in shape: {x_t.shape}, {y1.shape}, {y2.shape}")
        z = ops.concat_channels([x_t, y1, y2])
        z = ops.relu(self.conv1(z))
        z = ops.relu(self.conv2(z))
        return ops.sigmoid(self.conv3(z))
