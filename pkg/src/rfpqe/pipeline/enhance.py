from __future__ import annotations

from typing import Callable

import numpy as np

from ..autograd import Tensor, no_grad
from ..ensemble import gated_fuse, self_ensemble
from ..errors import DimensionError, UsageError
from ..net.qenet import MaskNet, QENet
from ..rfp import TrackMode, detect_candidates, naive_references, select_references
from .data import FrameSequence
from .train import build_stack

Enhancer = Callable[[np.ndarray], np.ndarray]


def model_function(model: QENet) -> Enhancer:
    """Wrap a network as ``(N, K, H, W) array -> (N, C, H, W) array``.

    Inputs whose spatial size is not a multiple of the downsample factor are
    edge-padded and the output cropped back.
    """
    s = model.cfg.iqe.downsample
    dtype = model.iqe.head.weight.dtype

    def run(stack: np.ndarray) -> np.ndarray:
        if stack.ndim != 4 or stack.shape[1] != model.cfg.stack_channels:
            raise DimensionError(f"model expects (N, {model.cfg.stack_channels}, H, W), got {stack.shape}")
        h, w = stack.shape[2:]
        ph, pw = -h % s, -w % s
        x = np.pad(stack, ((0, 0), (0, 0), (0, ph), (0, pw)), mode="edge") if ph or pw else stack
        with no_grad():
            out = model(Tensor(x, dtype=dtype)).data
        return out[:, :, :h, :w]

    return run


def enhance(
    model: QENet,
    seq: FrameSequence,
    track: str = "fixed-qp",
    rfp: bool = True,
    use_self_ensemble: bool = False,
    fuse_with: QENet | None = None,
    mask: MaskNet | None = None,
) -> FrameSequence:
    """Enhance every frame: reference stack -> network -> compressed + residual.

    With ``fuse_with`` and ``mask`` the outputs of both networks are blended
    per pixel by the mask network; self-ensembling, when on, wraps each
    network separately.
    """
    if (fuse_with is None) != (mask is None):
        raise UsageError("fusion needs both a second model and a mask network")
    radius = model.cfg.radius
    if fuse_with is not None and fuse_with.cfg.radius != radius:
        raise DimensionError("fused models must use the same reference radius")

    def wrap(m: QENet) -> Enhancer:
        fn = model_function(m)
        return (lambda x: self_ensemble(fn, x)) if use_self_ensemble else fn

    f1 = wrap(model)
    f2 = wrap(fuse_with) if fuse_with is not None else None
    n = len(seq)
    cands = detect_candidates(seq.metadata, TrackMode(track)) if rfp else set()
    c = seq.frames.shape[1]
    out = np.empty_like(seq.frames)
    for t in range(n):
        refs = select_references(n, t, radius, cands) if rfp else naive_references(n, t, radius)
        stack = build_stack(seq.frames, refs, 0, 0)[None]
        y = f1(stack)
        if f2 is not None:
            y2 = f2(stack)
            x_t = stack[:, radius * c:(radius + 1) * c]
            with no_grad():
                m = mask(Tensor(x_t), Tensor(y), Tensor(y2)).data
            y = gated_fuse(y, y2, m)
        out[t] = y[0]
    return seq.with_frames(np.clip(out, 0.0, 1.0))
