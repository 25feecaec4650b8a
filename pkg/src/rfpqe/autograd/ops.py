"""Differentiable primitives.

All spatial operators take NCHW tensors. Pixel shuffle uses row-major
depth-to-space ordering: input channel ``c*s*s + i*s + j`` lands at
sub-pixel ``(i, j)`` of output channel ``c``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ConfigurationError, DimensionError
from .tensor import Tensor, as_tensor


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


def _coerce(a, b) -> tuple[Tensor, Tensor]:
    # Plain python/numpy scalars adopt the dtype of the tensor operand.
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = Tensor(b, dtype=a.dtype)
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = Tensor(a, dtype=b.dtype)
    return as_tensor(a), as_tensor(b)


def add(a, b) -> Tensor:
    a, b = _coerce(a, b)
    _broadcast_shape(a, b, "add")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._from_op(a.data + b.data, "add", (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _coerce(a, b)
    _broadcast_shape(a, b, "sub")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor._from_op(a.data - b.data, "sub", (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _coerce(a, b)
    _broadcast_shape(a, b, "mul")

    def bw(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return Tensor._from_op(a.data * b.data, "mul", (a, b), bw)


def scale_by_learnable(x: Tensor, alpha: Tensor) -> Tensor:
    """Multiply ``x`` by a trainable scalar (a 0-d tensor)."""
    if alpha.ndim != 0:
        raise DimensionError(f"scale factor must be 0-d, got shape {alpha.shape}")
    return mul(x, alpha)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor._from_op(np.where(mask, x.data, 0).astype(x.dtype), "relu", (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    # Split by sign so exp never overflows.
    d = x.data
    e = np.exp(-np.abs(d))
    out = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(d.dtype)
    return Tensor._from_op(out, "sigmoid", (x,), lambda g: (g * out * (1.0 - out),))


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    shape = x.shape
    return Tensor._from_op(np.asarray(x.data.sum()), "sum", (x,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(x: Tensor) -> Tensor:
    shape, n = x.shape, x.size
    return Tensor._from_op(np.asarray(x.data.mean()), "mean", (x,), lambda g: (np.full(shape, g / n, dtype=x.dtype),))


def _check_same(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


def l1_loss(a, b) -> Tensor:
    """Mean absolute error; the subgradient at a zero residual is 0."""
    a, b = _coerce(a, b)
    _check_same(a, b, "l1_loss")
    diff = a.data - b.data
    n = diff.size

    def bw(g):
        s = np.sign(diff) * (g / n)
        return s, -s

    return Tensor._from_op(np.asarray(np.abs(diff).mean()), "l1_loss", (a, b), bw)


def l2_loss(a, b) -> Tensor:
    """Mean squared error."""
    a, b = _coerce(a, b)
    _check_same(a, b, "l2_loss")
    diff = a.data - b.data
    n = diff.size

    def bw(g):
        s = diff * (2.0 * g / n)
        return s, -s

    return Tensor._from_op(np.asarray((diff * diff).mean()), "l2_loss", (a, b), bw)


def concat_channels(tensors: Sequence[Tensor]) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("concat_channels needs at least one tensor")
    ref = tensors[0].shape
    for t in tensors:
        if t.ndim != 4 or t.shape[0] != ref[0] or t.shape[2:] != ref[2:]:
            raise DimensionError(f"concat_channels: incompatible shapes {ref} and {t.shape}")
    bounds = np.cumsum([0] + [t.shape[1] for t in tensors])

    def bw(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(tensors)))

    return Tensor._from_op(np.concatenate([t.data for t in tensors], axis=1), "concat", tensors, bw)


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    shape = x.shape

    def bw(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[:, start:stop] = g
        return (full,)

    return Tensor._from_op(x.data[:, start:stop].copy(), "slice", (x,), bw)


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    span = size + 2 * padding - kernel
    if span < 0 or span % stride:
        raise ConfigurationError(
            f"conv: (size {size} + 2*{padding} - kernel {kernel}) is not a non-negative multiple of stride {stride}"
        )
    return span // stride + 1


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation with zero padding.

    Computed as a sum of ``kh*kw`` shifted channel contractions, which keeps
    the summation order fixed regardless of thread count.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
    n, cin, h, w = x.shape
    cout, wcin, kh, kw = weight.shape
    if wcin != cin:
        raise DimensionError(f"conv2d: input has {cin} channels, weight expects {wcin}")
    if bias is not None and bias.shape != (cout,):
        raise DimensionError(f"conv2d: bias shape {bias.shape} != ({cout},)")
    if stride < 1 or padding < 0:
        raise ConfigurationError(f"conv2d: invalid stride={stride} padding={padding}")
    ho = conv_output_size(h, kh, stride, padding)
    wo = conv_output_size(w, kw, stride, padding)

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    wd = weight.data
    out = np.zeros((cout, n, ho, wo), dtype=np.result_type(x.dtype, weight.dtype))
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride]
            out += np.tensordot(wd[:, :, i, j], patch, axes=([1], [1]))
    out = out.transpose(1, 0, 2, 3)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out)

    def bw(g):
        gx = gw = gb = None
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    contrib = np.tensordot(g, wd[:, :, i, j], axes=([1], [0]))  # N, Ho, Wo, Cin
                    gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += contrib.transpose(0, 3, 1, 2)
            gx = gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp
        if weight.requires_grad:
            gw = np.empty_like(wd)
            for i in range(kh):
                for j in range(kw):
                    patch = xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride]
                    gw[:, :, i, j] = np.tensordot(g, patch, axes=([0, 2, 3], [0, 2, 3]))
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out, "conv2d", inputs, bw)


def _shuffle(data: np.ndarray, s: int) -> np.ndarray:
    n, c, h, w = data.shape
    return data.reshape(n, c // (s * s), s, s, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, c // (s * s), h * s, w * s)


def _unshuffle(data: np.ndarray, s: int) -> np.ndarray:
    n, c, h, w = data.shape
    return data.reshape(n, c, h // s, s, w // s, s).transpose(0, 1, 3, 5, 2, 4).reshape(n, c * s * s, h // s, w // s)


def pixel_shuffle(x: Tensor, s: int) -> Tensor:
    """Depth-to-space: (N, C*s*s, H, W) -> (N, C, s*H, s*W)."""
    if x.ndim != 4 or s < 1 or x.shape[1] % (s * s):
        raise DimensionError(f"pixel_shuffle: channels of {x.shape} not divisible by {s}^2")
    out = np.ascontiguousarray(_shuffle(x.data, s))
    return Tensor._from_op(out, "pixel_shuffle", (x,), lambda g: (np.ascontiguousarray(_unshuffle(g, s)),))


def pixel_unshuffle(x: Tensor, s: int) -> Tensor:
    """Space-to-depth, the exact inverse of :func:`pixel_shuffle`."""
    if x.ndim != 4 or s < 1 or x.shape[2] % s or x.shape[3] % s:
        raise DimensionError(f"pixel_unshuffle: spatial extent of {x.shape} not divisible by {s}")
    out = np.ascontiguousarray(_unshuffle(x.data, s))
    return Tensor._from_op(out, "pixel_unshuffle", (x,), lambda g: (np.ascontiguousarray(_shuffle(g, s)),))


def global_avg_pool(x: Tensor) -> Tensor:
    """(N, C, H, W) -> (N, C, 1, 1)."""
    n, c, h, w = x.shape
    scale = 1.0 / (h * w)
    out = x.data.mean(axis=(2, 3), keepdims=True)
    return Tensor._from_op(out, "gap", (x,), lambda g: (np.broadcast_to(g * scale, x.shape).astype(x.dtype),))


def channel_attention(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Tensor:
    """Squeeze-and-excitation gating: ``x * sigmoid(W2 relu(W1 gap(x)))``.

    ``w1`` is (C/rho, C, 1, 1) and ``w2`` is (C, C/rho, 1, 1).
    """
    c = x.shape[1]
    if w1.ndim != 4 or w1.shape[1] != c or w2.shape[0] != c or w2.shape[1] != w1.shape[0]:
        raise DimensionError(f"channel_attention: weights {w1.shape}/{w2.shape} do not fit {c} channels")
    squeezed = global_avg_pool(x)
    gate = sigmoid(conv2d(relu(conv2d(squeezed, w1, b1)), w2, b2))
    return mul(x, gate)


def check_reduction(channels: int, reduction: int) -> int:
    if reduction < 1 or channels % reduction:
        raise ConfigurationError(f"channel attention: {channels} channels not divisible by reduction {reduction}")
    return channels // reduction
