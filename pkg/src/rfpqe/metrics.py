"""Fidelity, fluctuation and rate-distortion metrics.

Frames are interpreted on the 8-bit scale [0, 255].
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ComputationError, DimensionError, UsageError

PSNR_CAP = 100.0
DATA_RANGE = 255.0


def psnr(a, b, data_range: float = DATA_RANGE) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"psnr: shapes {a.shape} and {b.shape} differ")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(data_range**2 / mse))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = len(g)
    rows = np.lib.stride_tricks.sliding_window_view(img, k, axis=-2) @ g
    return np.lib.stride_tricks.sliding_window_view(rows, k, axis=-1) @ g


def ssim(a, b, data_range: float = DATA_RANGE, win_size: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean SSIM over all fully-contained Gaussian windows (and channels)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"ssim: shapes {a.shape} and {b.shape} differ")
    if a.ndim < 2 or a.shape[-1] < win_size or a.shape[-2] < win_size:
        raise UsageError(f"ssim needs frames of at least {win_size}x{win_size}, got {a.shape}")
    g = gaussian_window(win_size, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def _collapse_plateaus(curve: np.ndarray) -> np.ndarray:
    keep = np.ones(len(curve), dtype=bool)
    keep[1:] = curve[1:] != curve[:-1]
    return curve[keep]


def curve_stats(curve: Sequence[float]) -> tuple[float, float]:
    """Return ``(pvd, sd)`` of a per-frame quality curve.

    SD is the population standard deviation. PVD averages, over interior
    peaks, the drop to the first interior valley after that peak; peaks with
    no later valley are ignored. Runs of equal values count as one point.
    """
    c = np.asarray(curve, dtype=np.float64)
    if c.size < 1:
        raise UsageError("quality curve is empty")
    sd = float(np.std(c))
    pts = _collapse_plateaus(c)
    peaks = [i for i in range(1, len(pts) - 1) if pts[i] > pts[i - 1] and pts[i] > pts[i + 1]]
    valleys = [i for i in range(1, len(pts) - 1) if pts[i] < pts[i - 1] and pts[i] < pts[i + 1]]
    drops = []
    for p in peaks:
        nxt = next((v for v in valleys if v > p), None)
        if nxt is not None:
            drops.append(pts[p] - pts[nxt])
    pvd = float(np.mean(drops)) if drops else 0.0
    return pvd, sd


@dataclass(frozen=True)
class RdPoint:
    bitrate: float
    psnr: float

    def __post_init__(self):
        if not self.bitrate > 0:
            raise UsageError(f"bitrate must be positive, got {self.bitrate}")


def _rd_arrays(points) -> tuple[np.ndarray, np.ndarray]:
    pts = [p if isinstance(p, RdPoint) else RdPoint(*p) for p in points]
    if len(pts) < 4:
        raise UsageError(f"BD-BR needs at least 4 rate-distortion points, got {len(pts)}")
    return np.array([p.bitrate for p in pts]), np.array([p.psnr for p in pts])


def bd_br(anchor: Iterable, test: Iterable) -> float:
    """Bjontegaard delta bitrate of ``test`` against ``anchor``, in percent.

    Negative values mean ``test`` needs less bitrate for equal PSNR.
    """
    r1, q1 = _rd_arrays(anchor)
    r2, q2 = _rd_arrays(test)
    lo = max(q1.min(), q2.min())
    hi = min(q1.max(), q2.max())
    if not hi > lo:
        raise ComputationError(f"PSNR ranges do not overlap ([{q1.min()}, {q1.max()}] vs [{q2.min()}, {q2.max()}])")
    p1 = np.polyint(np.polyfit(q1, np.log10(r1), 3))
    p2 = np.polyint(np.polyfit(q2, np.log10(r2), 3))
    avg1 = (np.polyval(p1, hi) - np.polyval(p1, lo)) / (hi - lo)
    avg2 = (np.polyval(p2, hi) - np.polyval(p2, lo)) / (hi - lo)
    return float((10.0 ** (avg2 - avg1) - 1.0) * 100.0)


def bd_br_reduction(anchor: Iterable, test: Iterable) -> float:
    """Bitrate saving as a positive percentage (``-bd_br``)."""
    return -bd_br(anchor, test)


def read_rd_csv(text: str) -> list[RdPoint]:
    """Parse ``bitrate,psnr`` rows; blank lines, ``#`` comments and a header row are skipped."""
    points = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 2:
            raise UsageError(f"line {lineno}: expected 'bitrate,psnr', got {line!r}")
        try:
            points.append(RdPoint(float(cells[0]), float(cells[1])))
        except ValueError:
            if not points and lineno == 1:
                continue
            raise UsageError(f"line {lineno}: not numeric: {line!r}") from None
    return points


@dataclass
class SequenceEval:
    name: str
    delta_psnr: float
    delta_ssim: float
    pvd: float
    sd: float
    pvd_compressed: float
    sd_compressed: float
    psnr_compressed: list[float] = field(default_factory=list)
    psnr_enhanced: list[float] = field(default_factory=list)


def delta_metrics(compressed: Sequence, enhanced: Sequence, truth: Sequence, name: str = "sequence") -> SequenceEval:
    """Per-frame PSNR/SSIM gains of ``enhanced`` over ``compressed`` against ``truth``."""
    if not (len(compressed) == len(enhanced) == len(truth)):
        raise UsageError(
            f"sequence lengths differ: compressed={len(compressed)} enhanced={len(enhanced)} truth={len(truth)}"
        )
    if not truth:
        raise UsageError("cannot evaluate an empty sequence")
    pc, pe, dp, ds = [], [], [], []
    for x, y, gt in zip(compressed, enhanced, truth):
        a, b = psnr(x, gt), psnr(y, gt)
        pc.append(a)
        pe.append(b)
        dp.append(b - a)
        ds.append(ssim(y, gt) - ssim(x, gt))
    pvd, sd = curve_stats(pe)
    pvd_c, sd_c = curve_stats(pc)
    return SequenceEval(name, float(np.mean(dp)), float(np.mean(ds)), pvd, sd, pvd_c, sd_c, pc, pe)


AGGREGATE_FIELDS = ("delta_psnr", "delta_ssim", "pvd", "sd", "pvd_compressed", "sd_compressed")


@dataclass
class EvalReport:
    sequences: list[SequenceEval]
    provenance: dict = field(default_factory=dict)

    @property
    def aggregate(self) -> dict[str, float]:
        if not self.sequences:
            return {k: 0.0 for k in AGGREGATE_FIELDS}
        return {k: float(np.mean([getattr(s, k) for s in self.sequences])) for k in AGGREGATE_FIELDS}

    def to_dict(self) -> dict:
        return {
            "sequences": [asdict(s) for s in self.sequences],
            "aggregate": self.aggregate,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        return cls([SequenceEval(**s) for s in data["sequences"]], dict(data.get("provenance", {})))
