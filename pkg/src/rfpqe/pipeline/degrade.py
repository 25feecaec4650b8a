"""Desk-scale stand-in for a video encoder.

Each frame is blurred, blockwise-DCT quantized with a step that follows a
repeating quality cycle, then corrupted with Gaussian noise. The step of frame
``i`` is ``quality_cycle[i % len(quality_cycle)]``; the emitted pseudo-QP is
``round(qp_scale * step)``. Frames starting a cycle are typed I; other frames
are P when their step is below the cycle maximum and B otherwise.
"""

from __future__ import annotations

import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..rfp import FrameMetadata, FrameType
from .config import DegradeConfig
from .data import FrameSequence, TrainingPair, synth_clean_sequence, write_sequence

# Standard JPEG luminance table; scaled so that step 16 reproduces it.
JPEG_LUMA = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.float64)


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis (rows are frequencies)."""
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * x + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
    m[0] /= math.sqrt(2.0)
    return m


def quant_table(block: int) -> np.ndarray:
    if block == 8:
        return JPEG_LUMA / 16.0
    u = np.arange(block)
    # Same growth with frequency as the 8x8 table, roughly.
    return 1.0 + (u[:, None] + u[None, :]) * (6.0 / max(block - 1, 1))


def quantize_blocks(img: np.ndarray, step: float, block: int) -> np.ndarray:
    """Quantize DCT coefficients of each ``block x block`` tile (8-bit scale input)."""
    if step <= 0:
        return img
    h, w = img.shape
    ph, pw = -h % block, -w % block
    padded = np.pad(img - 128.0, ((0, ph), (0, pw)), mode="edge")
    hb, wb = padded.shape[0] // block, padded.shape[1] // block
    tiles = padded.reshape(hb, block, wb, block).transpose(0, 2, 1, 3)
    d = dct_matrix(block)
    q = step * quant_table(block)
    coeffs = d @ tiles @ d.T
    rec = d.T @ (np.rint(coeffs / q) * q) @ d
    out = rec.transpose(0, 2, 1, 3).reshape(padded.shape)[:h, :w] + 128.0
    return out


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return img
    radius = max(1, int(math.ceil(3 * sigma)))
    x = np.arange(-radius, radius + 1)
    k = np.exp(-(x**2) / (2 * sigma**2))
    k /= k.sum()
    padded = np.pad(img, radius, mode="reflect")
    rows = np.lib.stride_tricks.sliding_window_view(padded, len(k), axis=0) @ k
    return np.lib.stride_tricks.sliding_window_view(rows, len(k), axis=1) @ k


def frame_plan(num_frames: int, cfg: DegradeConfig) -> list[tuple[float, FrameMetadata]]:
    cycle = cfg.quality_cycle
    top = max(cycle)
    plan = []
    for i in range(num_frames):
        step = cycle[i % len(cycle)]
        if i % len(cycle) == 0:
            ftype = FrameType.I
        else:
            ftype = FrameType.P if step < top else FrameType.B
        plan.append((step, FrameMetadata(i, int(round(cfg.qp_scale * step)), ftype)))
    return plan


def synth_degrade(clean: FrameSequence, cfg: DegradeConfig) -> FrameSequence:
    rng = np.random.default_rng(cfg.seed)
    out = np.empty_like(clean.frames)
    plan = frame_plan(len(clean), cfg)
    for i, (step, _) in enumerate(plan):
        for c in range(clean.frames.shape[1]):
            img = clean.frames[i, c].astype(np.float64) * 255.0
            img = gaussian_blur(img, cfg.blur_sigma)
            img = quantize_blocks(img, step, cfg.block_size)
            if cfg.noise_sigma > 0:
                img = img + rng.normal(0.0, cfg.noise_sigma, img.shape)
            out[i, c] = np.clip(np.rint(img), 0, 255) / np.float32(255.0)
    return FrameSequence(out, [m for _, m in plan], clean.name, dict(clean.extra))


def build_synthetic_dataset(
    root,
    n_sequences: int = 2,
    num_frames: int = 8,
    size: int = 48,
    cfg: DegradeConfig | None = None,
    seed: int = 0,
    write: bool = True,
) -> list[TrainingPair]:
    """Generate clean sequences, degrade them, and optionally lay them out as
    ``root/<seq>/{truth,compressed}/`` for training."""
    cfg = cfg or DegradeConfig()
    pairs = []
    for k in range(n_sequences):
        name = f"seq{k:03d}"
        clean = synth_clean_sequence(num_frames, size, size, seed=seed * 1000 + k, name=name)
        lq = synth_degrade(clean, replace(cfg, seed=cfg.seed * 1000 + k))
        if write:
            write_sequence(clean, Path(root) / name / "truth")
            write_sequence(lq, Path(root) / name / "compressed")
        pairs.append(TrainingPair(lq, clean))
    return pairs
