"""Geometric self-ensemble over the dihedral group D4 and gated two-model fusion."""

from __future__ import annotations

import enum
from typing import Callable

import numpy as np

from .autograd import ops
from .autograd.tensor import Tensor, as_tensor
from .errors import DimensionError
from .net.qenet import MaskNet


class Augmentation(enum.Enum):
    """``(quarter_turns, flip)``: flip the width axis first, then rotate counter-clockwise."""

    IDENTITY = (0, False)
    ROT90 = (1, False)
    ROT180 = (2, False)
    ROT270 = (3, False)
    FLIP = (0, True)
    FLIP_ROT90 = (1, True)
    FLIP_ROT180 = (2, True)
    FLIP_ROT270 = (3, True)

    @property
    def turns(self) -> int:
        return self.value[0]

    @property
    def flip(self) -> bool:
        return self.value[1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.flip:
            x = x[..., ::-1]
        return np.ascontiguousarray(np.rot90(x, self.turns, axes=(-2, -1)))

    def invert(self, x: np.ndarray) -> np.ndarray:
        x = np.rot90(x, -self.turns, axes=(-2, -1))
        if self.flip:
            x = x[..., ::-1]
        return np.ascontiguousarray(x)

    @property
    def inverse(self) -> "Augmentation":
        # Reflections are involutions; rotations invert to the opposite turn.
        return self if self.flip else Augmentation((-self.turns % 4, False))

    def compose(self, other: "Augmentation") -> "Augmentation":
        """The element equal to applying ``other`` first, then ``self``."""
        probe = np.arange(9.0).reshape(3, 3)
        target = self.apply(other.apply(probe))
        for aug in Augmentation:
            if np.array_equal(aug.apply(probe), target):
                return aug
        raise AssertionError("D4 is closed under composition")


def _tree_mean(branches: list[np.ndarray]) -> np.ndarray:
    # Pairwise summation in fixed order: identical branches average back exactly.
    level = list(branches)
    while len(level) > 1:
        level = [level[i] + level[i + 1] if i + 1 < len(level) else level[i] for i in range(0, len(level), 2)]
    return level[0] / len(branches)


def self_ensemble(model: Callable[[np.ndarray], np.ndarray], stack: np.ndarray) -> np.ndarray:
    """Mean over all eight augmentations of ``inverse(aug)(model(aug(stack)))``.

    The same spatial transform is applied to every frame in ``stack``; temporal
    order is untouched.
    """
    branches = [aug.invert(np.asarray(model(aug.apply(stack)))) for aug in Augmentation]
    return _tree_mean(branches)


def mask_net_forward(x_t, y1, y2, net: MaskNet) -> Tensor:
    return net(as_tensor(x_t), as_tensor(y1), as_tensor(y2))


def _check_fuse_shapes(y1, y2, mask) -> None:
    if y1.shape != y2.shape:
        raise DimensionError(f"gated_fuse: outputs differ in shape {y1.shape} vs {y2.shape}")
    if mask.ndim != y1.ndim or mask.shape[0] != y1.shape[0] or mask.shape[2:] != y1.shape[2:] or mask.shape[1] not in (1, y1.shape[1]):
        raise DimensionError(f"gated_fuse: mask {mask.shape} does not match frames {y1.shape}")


def gated_fuse(y1, y2, mask):
    """``mask * y1 + (1 - mask) * y2``; the mask broadcasts over channels.

    Returns a Tensor when any argument is a Tensor, otherwise an array.
    """
    if any(isinstance(v, Tensor) for v in (y1, y2, mask)):
        y1, y2, mask = as_tensor(y1), as_tensor(y2), as_tensor(mask)
        _check_fuse_shapes(y1, y2, mask)
        return ops.add(ops.mul(mask, y1), ops.mul(ops.sub(1.0, mask), y2))
    y1, y2, mask = np.asarray(y1), np.asarray(y2), np.asarray(mask)
    _check_fuse_shapes(y1, y2, mask)
    return mask * y1 + (1.0 - mask) * y2
