from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .tensor import Tensor


def numerical_grad(fn: Callable[[], Tensor], t: Tensor, index: tuple, eps: float = 1e-5) -> float:
    """Central difference of the scalar ``fn()`` with respect to one entry of ``t``."""
    orig = t.data[index]
    t.data[index] = orig + eps
    up = float(fn().data)
    t.data[index] = orig - eps
    down = float(fn().data)
    t.data[index] = orig
    return (up - down) / (2.0 * eps)


def gradcheck(
    fn: Callable[[], Tensor],
    tensors: Mapping[str, Tensor],
    eps: float = 1e-5,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> dict[str, float]:
    """Compare analytic and central-difference gradients.

    Returns, per tensor, ``||analytic - numeric|| / max(||analytic||, ||numeric||)``
    over the checked entries (0.0 when both vanish). ``max_entries`` caps the
    number of randomly chosen entries per tensor.
    """
    for t in tensors.values():
        t.grad = None
    loss = fn()
    loss.backward()
    rng = rng or np.random.default_rng(0)
    errors = {}
    for name, t in tensors.items():
        analytic_full = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = np.arange(t.size)
        if max_entries is not None and t.size > max_entries:
            flat = np.sort(rng.choice(t.size, size=max_entries, replace=False))
        analytic = np.empty(len(flat))
        numeric = np.empty(len(flat))
        for k, f in enumerate(flat):
            idx = np.unravel_index(f, t.shape) if t.ndim else ()
            analytic[k] = analytic_full[idx]
            numeric[k] = numerical_grad(fn, t, idx, eps)
        scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
        errors[name] = 0.0 if scale == 0 else float(np.linalg.norm(analytic - numeric) / scale)
    return errors
