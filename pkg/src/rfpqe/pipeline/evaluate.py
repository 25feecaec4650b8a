from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..metrics import EvalReport, SequenceEval, delta_metrics
from ..net.weights import atomic_write_bytes
from .data import FrameSequence, discover_sequences, load_sequence

PROVENANCE = "provenance.json"


def evaluate(compressed: FrameSequence, enhanced: FrameSequence, truth: FrameSequence) -> SequenceEval:
    """Metrics on the 8-bit scale for one aligned triple of sequences."""
    shapes = {compressed.frames.shape, enhanced.frames.shape, truth.frames.shape}
    if len(shapes) != 1:
        raise DataError(f"sequences are not aligned: {sorted(shapes)}")
    to8 = lambda s: [f.astype(np.float64) * 255.0 for f in s.frames]  # noqa: E731
    return delta_metrics(to8(compressed), to8(enhanced), to8(truth), name=truth.name)


def evaluate_dirs(compressed: str | os.PathLike, enhanced: str | os.PathLike, truth: str | os.PathLike) -> EvalReport:
    """Match sequences by directory name across the three trees."""
    c, e, t = discover_sequences(compressed), discover_sequences(enhanced), discover_sequences(truth)
    if len(c) == len(e) == len(t) == 1:
        names = [(next(iter(c)), next(iter(e)), next(iter(t)))]
    else:
        missing = (set(c) ^ set(t)) | (set(e) ^ set(t))
        if missing:
            raise DataError(f"sequence names do not match across directories: {sorted(missing)}")
        names = [(n, n, n) for n in sorted(t)]
    evals = []
    for nc, ne, nt in names:
        result = evaluate(load_sequence(c[nc]), load_sequence(e[ne]), load_sequence(t[nt]))
        result.name = nt
        evals.append(result)
    provenance = {}
    for d in {e[ne] for _, ne, _ in names} | {Path(enhanced)}:
        p = Path(d) / PROVENANCE
        if p.is_file():
            provenance.update(json.loads(p.read_text(encoding="utf-8")))
    return EvalReport(evals, provenance)


def write_report(report: EvalReport, path: str | os.PathLike) -> None:
    atomic_write_bytes(path, report.to_json().encode("utf-8"))


def read_report(path: str | os.PathLike) -> EvalReport:
    try:
        return EvalReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read report {path}: {exc}") from None


def plot_curves(report: EvalReport, out_dir: str | os.PathLike, formats: tuple[str, ...] = ("png", "svg")) -> list[Path]:
    """One per-frame PSNR plot (compressed vs enhanced) per sequence."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for s in report.sequences:
        fig, ax = plt.subplots(figsize=(7, 3))
        x = np.arange(len(s.psnr_enhanced))
        ax.plot(x, s.psnr_compressed, "-o", ms=3, label=f"compressed (PVD {s.pvd_compressed:.2f}, SD {s.sd_compressed:.2f})")
        ax.plot(x, s.psnr_enhanced, "-o", ms=3, label=f"enhanced (PVD {s.pvd:.2f}, SD {s.sd:.2f})")
        ax.set_xlabel("frame")
        ax.set_ylabel("PSNR (dB)")
        ax.set_title(f"{s.name}: dPSNR {s.delta_psnr:+.3f} dB")
        ax.legend(fontsize=7)
        fig.tight_layout()
        for fmt in formats:
            path = out / f"{s.name}.{fmt}"
            tmp = out / f".{s.name}.tmp.{fmt}"
            fig.savefig(tmp, format=fmt)
            os.replace(tmp, path)
            written.append(path)
        plt.close(fig)
    return written
