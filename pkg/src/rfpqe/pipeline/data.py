"""Sequence manifests and raw 8-bit luminance frames.

A sequence directory holds ``manifest.json`` plus one raw file per frame::

    {
      "width": 64, "height": 64, "pixel_format": "gray8",
      "frames": [{"index": 0, "file": "00000.y", "qp": 8, "frame_type": "I"}, ...]
    }

Each frame file is ``width*height`` bytes, row-major. An optional top-level
``"name"`` is carried through.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..rfp import FrameMetadata, FrameType

MANIFEST = "manifest.json"
PIXEL_FORMAT = "gray8"
_TOP_KEYS = {"width", "height", "pixel_format", "frames", "name"}
_FRAME_KEYS = {"index", "file", "qp", "frame_type"}


@dataclass
class FrameSequence:
    """Frames as float32 ``(T, C, H, W)`` in [0, 1] plus per-frame metadata."""

    frames: np.ndarray
    metadata: list[FrameMetadata]
    name: str = "sequence"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.frames.ndim != 4:
            raise DataError(f"frames must be (T, C, H, W), got {self.frames.shape}")
        if len(self.metadata) != len(self.frames):
            raise DataError(f"{len(self.frames)} frames but {len(self.metadata)} metadata records")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames.shape[2]

    @property
    def width(self) -> int:
        return self.frames.shape[3]

    def to_uint8(self) -> np.ndarray:
        return np.clip(np.rint(self.frames.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)

    def with_frames(self, frames: np.ndarray) -> "FrameSequence":
        return FrameSequence(np.asarray(frames, dtype=np.float32), list(self.metadata), self.name, dict(self.extra))


def _fail(path: Path, msg: str):
    raise DataError(f"{path}: {msg}")


def _parse_manifest(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        _fail(path, "manifest not found")
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        _fail(path, f"malformed manifest ({exc})")
    if not isinstance(doc, dict):
        _fail(path, "manifest must be a JSON object")
    missing = sorted({"width", "height", "pixel_format", "frames"} - set(doc))
    if missing:
        _fail(path, f"manifest lacks keys {missing}")
    unknown = sorted(set(doc) - _TOP_KEYS)
    if unknown:
        _fail(path, f"manifest has unknown keys {unknown}")
    if doc["pixel_format"] != PIXEL_FORMAT:
        _fail(path, f"unsupported pixel_format {doc['pixel_format']!r} (expected {PIXEL_FORMAT!r})")
    for key in ("width", "height"):
        if not isinstance(doc[key], int) or doc[key] < 1:
            _fail(path, f"{key} must be a positive integer")
    if not isinstance(doc["frames"], list) or not doc["frames"]:
        _fail(path, "frames must be a non-empty list")
    return doc


def load_sequence(manifest_path: str | os.PathLike) -> FrameSequence:
    path = Path(manifest_path)
    if path.is_dir():
        path = path / MANIFEST
    doc = _parse_manifest(path)
    w, h = doc["width"], doc["height"]
    entries = doc["frames"]
    seen = set()
    for e in entries:
        if not isinstance(e, dict) or set(e) != _FRAME_KEYS:
            _fail(path, f"frame record must have exactly keys {sorted(_FRAME_KEYS)}, got {e!r}")
        if e["index"] in seen:
            _fail(path, f"duplicate frame index {e['index']}")
        seen.add(e["index"])
    entries = sorted(entries, key=lambda e: e["index"])
    if [e["index"] for e in entries] != list(range(len(entries))):
        _fail(path, "frame indices must be contiguous from 0")

    frames = np.empty((len(entries), 1, h, w), dtype=np.float32)
    metadata = []
    for e in entries:
        fpath = path.parent / e["file"]
        try:
            raw = fpath.read_bytes()
        except FileNotFoundError:
            _fail(path, f"frame file {fpath} is missing")
        if len(raw) != w * h:
            _fail(path, f"frame file {fpath} has {len(raw)} bytes, expected {w * h} ({w}x{h})")
        frames[e["index"], 0] = np.frombuffer(raw, dtype=np.uint8).reshape(h, w) / np.float32(255.0)
        try:
            metadata.append(FrameMetadata(int(e["index"]), int(e["qp"]), FrameType(e["frame_type"])))
        except (ValueError, TypeError):
            _fail(path, f"bad qp/frame_type in record {e!r}")
    return FrameSequence(frames, metadata, doc.get("name", path.parent.name))


def write_sequence(seq: FrameSequence, out_dir: str | os.PathLike) -> Path:
    """Write frames and manifest; files appear only once everything is encoded.

    Frames are staged in a temporary directory and moved into place, the
    manifest last.
    """
    if seq.frames.shape[1] != 1:
        raise DataError(f"only single-plane luminance frames can be written, got {seq.frames.shape[1]} channels")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pixels = seq.to_uint8()
    records = []
    with tempfile.TemporaryDirectory(dir=out, prefix=".staging-") as tmp:
        tmp = Path(tmp)
        for i, m in enumerate(seq.metadata):
            fname = f"{i:05d}.y"
            (tmp / fname).write_bytes(pixels[i, 0].tobytes())
            records.append({"index": i, "file": fname, "qp": int(m.qp), "frame_type": m.frame_type.value})
        doc = {"name": seq.name, "width": seq.width, "height": seq.height, "pixel_format": PIXEL_FORMAT, "frames": records}
        (tmp / MANIFEST).write_text(json.dumps(doc, indent=1), encoding="utf-8")
        for r in records:
            os.replace(tmp / r["file"], out / r["file"])
        os.replace(tmp / MANIFEST, out / MANIFEST)
    return out / MANIFEST


def discover_sequences(root: str | os.PathLike) -> dict[str, Path]:
    """``{name: sequence_dir}`` for ``root`` itself or its immediate subdirectories."""
    root = Path(root)
    if (root / MANIFEST).is_file():
        return {root.name: root}
    if not root.is_dir():
        raise DataError(f"{root} is not a directory")
    found = {p.name: p for p in sorted(root.iterdir()) if (p / MANIFEST).is_file()}
    if not found:
        raise DataError(f"no sequences (directories with {MANIFEST}) under {root}")
    return found


@dataclass
class TrainingPair:
    compressed: FrameSequence
    truth: FrameSequence


def load_dataset(root: str | os.PathLike) -> list[TrainingPair]:
    """Load ``root/<seq>/{compressed,truth}/`` pairs."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} is not a directory")
    pairs = []
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        if (d / "compressed" / MANIFEST).is_file() and (d / "truth" / MANIFEST).is_file():
            lq, gt = load_sequence(d / "compressed"), load_sequence(d / "truth")
            if lq.frames.shape != gt.frames.shape:
                raise DataError(f"{d}: compressed {lq.frames.shape} and truth {gt.frames.shape} differ")
            pairs.append(TrainingPair(lq, gt))
    if not pairs:
        raise DataError(f"no compressed/truth sequence pairs under {root}")
    return pairs


def synth_clean_sequence(num_frames: int, height: int, width: int, seed: int = 0, name: str = "synthetic") -> FrameSequence:
    """Textured, translating content: oriented gratings plus hard-edged blobs."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    n_waves = 6
    freqs = rng.uniform(0.03, 0.35, n_waves)
    angles = rng.uniform(0, np.pi, n_waves)
    phases = rng.uniform(0, 2 * np.pi, n_waves)
    amps = rng.uniform(8, 24, n_waves)
    velocity = rng.uniform(-1.5, 1.5, 2)
    blobs = [(rng.uniform(0, height), rng.uniform(0, width), rng.uniform(3, 9), rng.uniform(-50, 50))
             for _ in range(5)]
    frames = np.empty((num_frames, 1, height, width), dtype=np.float32)
    for t in range(num_frames):
        dy, dx = velocity * t
        img = np.full((height, width), 128.0)
        for f, a, p, amp in zip(freqs, angles, phases, amps):
            proj = (yy - dy) * np.sin(a) + (xx - dx) * np.cos(a)
            img += amp * np.sin(2 * np.pi * f * proj + p)
        for cy, cx, r, level in blobs:
            oy = (yy - cy - dy + height / 2) % height - height / 2
            ox = (xx - cx - dx + width / 2) % width - width / 2
            img[oy**2 + ox**2 < r * r] += level
        frames[t, 0] = np.clip(np.rint(img), 0, 255) / np.float32(255.0)
    meta = [FrameMetadata(i, 0, FrameType.I) for i in range(num_frames)]
    return FrameSequence(frames, meta, name)

