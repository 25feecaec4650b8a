"""2-D DFT, amplitude/phase decomposition and the amplitude/phase FFT loss.

The forward transform is unnormalized::

    F(u, v) = sum_x sum_y f(x, y) exp(-2j*pi*(u*x/H + v*y/W))

Phase uses the four-quadrant arctangent, so it lies in (-pi, pi]; bins whose
amplitude falls below ``eps_amp`` get phase 0 and contribute no gradient.
Phase differences are used raw, without wrapping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autograd.tensor import Tensor, as_tensor
from .errors import ConfigurationError, DimensionError, UsageError


@dataclass
class ComplexField:
    re: np.ndarray
    im: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.re.shape

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im


@dataclass
class FftLossConfig:
    lam: float = 1.0
    norm_mode: str = "L1"
    eps_amp: float = 1e-8

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigurationError(f"lambda must be >= 0, got {self.lam}")
        if self.eps_amp <= 0:
            raise ConfigurationError(f"eps_amp must be > 0, got {self.eps_amp}")
        if self.norm_mode not in ("L1", "L2"):
            raise ConfigurationError(f"norm_mode must be L1 or L2, got {self.norm_mode!r}")


def _as_array(x) -> np.ndarray:
    arr = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if arr.ndim < 2 or arr.shape[-1] < 1 or arr.shape[-2] < 1:
        raise DimensionError(f"expected (..., H, W) with H, W >= 1, got {arr.shape}")
    return arr


def _self_conjugate_index(n: int) -> list[int]:
    return [0, n // 2] if n % 2 == 0 and n > 1 else [0]


def dft2(frame) -> ComplexField:
    """Per-channel 2-D DFT over the last two axes of a real frame."""
    arr = _as_array(frame)
    spec = np.fft.fft2(arr, axes=(-2, -1))
    im = spec.imag.copy()
    # Bins that are their own conjugate partner are exactly real for real input.
    h, w = arr.shape[-2:]
    for u in _self_conjugate_index(h):
        for v in _self_conjugate_index(w):
            im[..., u, v] = 0.0
    return ComplexField(spec.real.copy(), im)


def dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def dft2_direct(frame) -> ComplexField:
    """Same transform as :func:`dft2`, by explicit DFT-matrix products."""
    arr = _as_array(frame)
    h, w = arr.shape[-2:]
    spec = dft_matrix(h) @ arr @ dft_matrix(w).T
    return ComplexField(spec.real.copy(), spec.imag.copy())


def amplitude_phase(field: ComplexField, eps_amp: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    amp = np.hypot(field.re, field.im)
    phase = np.arctan2(field.im, field.re)
    phase = np.where(amp < eps_amp, 0.0, phase)
    # arctan2(-0.0, x<0) gives -pi; fold onto +pi to stay in (-pi, pi].
    phase = np.where(phase == -np.pi, np.pi, phase)
    return amp, phase


def _penalty(diff: np.ndarray, mode: str) -> tuple[float, np.ndarray]:
    """Mean penalty and its derivative with respect to ``diff`` (undivided)."""
    if mode == "L1":
        return float(np.abs(diff).mean()), np.sign(diff)
    return float((diff * diff).mean()), 2.0 * diff


def fft_loss(pred: Tensor, target, cfg: FftLossConfig | None = None) -> Tensor:
    """``mean pen(A(pred) - A(target)) + lam * mean pen(P(pred) - P(target))``.

    ``target`` is treated as a constant.
    """
    cfg = cfg or FftLossConfig()
    pred = as_tensor(pred)
    tgt = _as_array(target)
    if pred.shape != tgt.shape:
        raise DimensionError(f"fft_loss: pred {pred.shape} and target {tgt.shape} differ")

    fp = dft2(pred.data)
    amp_p, ph_p = amplitude_phase(fp, cfg.eps_amp)
    amp_t, ph_t = amplitude_phase(dft2(tgt), cfg.eps_amp)
    n = amp_p.size

    amp_loss, d_amp = _penalty(amp_p - amp_t, cfg.norm_mode)
    ph_loss, d_ph = _penalty(ph_p - ph_t, cfg.norm_mode)
    value = amp_loss + cfg.lam * ph_loss

    def bw(g):
        live = amp_p >= cfg.eps_amp
        safe = np.where(live, amp_p, 1.0)
        g_amp = d_amp * (g / n)
        g_ph = d_ph * (cfg.lam * g / n)
        # dA/dRe = Re/A, dA/dIm = Im/A, dP/dRe = -Im/A^2, dP/dIm = Re/A^2
        g_re = np.where(live, g_amp * fp.re / safe - g_ph * fp.im / safe**2, 0.0)
        g_im = np.where(live, g_amp * fp.im / safe + g_ph * fp.re / safe**2, 0.0)
        h, w = pred.shape[-2:]
        # Adjoint of the forward DFT: grad_x = Re(sum_uv (gRe + i gIm) e^{+i theta}).
        grad = (np.fft.ifft2(g_re + 1j * g_im, axes=(-2, -1)) * (h * w)).real
        return (grad.astype(pred.dtype, copy=False),)

    return Tensor._from_op(np.asarray(value, dtype=pred.dtype), "fft_loss", (pred,), bw)


def radial_frequency(h: int, w: int) -> np.ndarray:
    """Radial frequency of each DFT bin, scaled so the on-axis Nyquist is 1."""
    fu = np.minimum(np.arange(h), h - np.arange(h)) / (h / 2.0)
    fv = np.minimum(np.arange(w), w - np.arange(w)) / (w / 2.0)
    return np.sqrt(fu[:, None] ** 2 + fv[None, :] ** 2)


def band_energy_error(pred, target, cutoff_fraction: float = 0.5) -> float:
    """Mean squared amplitude difference over bins above ``cutoff_fraction``."""
    if not 0.0 < cutoff_fraction < 1.0:
        raise UsageError(f"cutoff_fraction must lie in (0, 1), got {cutoff_fraction}")
    p, t = _as_array(pred), _as_array(target)
    if p.shape != t.shape:
        raise DimensionError(f"band_energy_error: shapes {p.shape} and {t.shape} differ")
    mask = radial_frequency(*p.shape[-2:]) > cutoff_fraction
    if not mask.any():
        return 0.0
    amp_p = np.abs(np.fft.fft2(p, axes=(-2, -1)))
    amp_t = np.abs(np.fft.fft2(t, axes=(-2, -1)))
    return float(((amp_p - amp_t)[..., mask] ** 2).mean())
