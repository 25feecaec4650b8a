"""Reference frame proposal.

Candidate frames come from per-frame codec metadata. In fixed-QP mode a frame
is a candidate when its QP is strictly lower than both neighbours (so the
first and last frames never qualify); in fixed-bitrate mode every I or P frame
is a candidate.

For a target ``t`` the preceding side starts at ``t-1``, then repeatedly takes
the nearest candidate strictly before the last pick, and pads with the last
pick once candidates run out. The following side mirrors this. When ``t-1``
(or ``t+1``) does not exist the first pick is clamped to ``t`` itself.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, UsageError


class FrameType(str, enum.Enum):
    I = "I"  # noqa: E741
    P = "P"
    B = "B"


class TrackMode(str, enum.Enum):
    FIXED_QP = "fixed-qp"
    FIXED_BITRATE = "fixed-bitrate"


@dataclass(frozen=True)
class FrameMetadata:
    index: int
    qp: int
    frame_type: FrameType

    def __post_init__(self):
        object.__setattr__(self, "frame_type", FrameType(self.frame_type))


@dataclass(frozen=True)
class ReferenceSet:
    preceding: tuple[int, ...]
    target: int
    following: tuple[int, ...]

    @property
    def radius(self) -> int:
        return len(self.preceding)

    def indices(self) -> list[int]:
        """All 2R+1 indices in temporal order, target in the middle."""
        return [*self.preceding, self.target, *self.following]

    def to_dict(self) -> dict:
        return {"preceding": list(self.preceding), "target": self.target, "following": list(self.following)}


def _check_metadata(metadata: Sequence[FrameMetadata]) -> None:
    if not metadata:
        raise UsageError("metadata sequence is empty")
    for pos, m in enumerate(metadata):
        if m.index != pos:
            raise DataError(f"frame indices must be contiguous from 0; position {pos} has index {m.index}")


def detect_candidates(metadata: Sequence[FrameMetadata], mode: TrackMode | str) -> set[int]:
    _check_metadata(metadata)
    mode = TrackMode(mode)
    if mode is TrackMode.FIXED_BITRATE:
        return {m.index for m in metadata if m.frame_type in (FrameType.I, FrameType.P)}
    qp = [m.qp for m in metadata]
    return {i for i in range(1, len(qp) - 1) if qp[i] < qp[i - 1] and qp[i] < qp[i + 1]}


def _select_side(first: int, radius: int, candidates: Sequence[int], step: int) -> list[int]:
    picks = [first]
    ordered = sorted(candidates, reverse=step < 0)
    for c in ordered:
        if len(picks) == radius:
            break
        if (c - picks[-1]) * step > 0:
            picks.append(c)
    picks.extend([picks[-1]] * (radius - len(picks)))
    return picks


def select_references(num_frames: int, t: int, radius: int, candidates: Iterable[int]) -> ReferenceSet:
    """Apply the selection rules given an already-detected candidate set."""
    if radius < 1:
        raise UsageError(f"radius must be >= 1, got {radius}")
    if not 0 <= t < num_frames:
        raise UsageError(f"target {t} outside [0, {num_frames})")
    cands = sorted(set(candidates))
    before = _select_side(t - 1 if t > 0 else t, radius, [c for c in cands if c < t], -1)
    after = _select_side(t + 1 if t < num_frames - 1 else t, radius, [c for c in cands if c > t], +1)
    return ReferenceSet(tuple(sorted(before)), t, tuple(sorted(after)))


def propose_references(
    metadata: Sequence[FrameMetadata], t: int, radius: int, mode: TrackMode | str
) -> ReferenceSet:
    return select_references(len(metadata), t, radius, detect_candidates(metadata, mode))


def naive_references(num_frames: int, t: int, radius: int) -> ReferenceSet:
    """Plain adjacent frames ``t-R..t-1`` and ``t+1..t+R``, clamped to the sequence."""
    if radius < 1:
        raise UsageError(f"radius must be >= 1, got {radius}")
    if not 0 <= t < num_frames:
        raise UsageError(f"target {t} outside [0, {num_frames})")
    before = [min(max(t - k, 0), num_frames - 1) for k in range(radius, 0, -1)]
    after = [min(max(t + k, 0), num_frames - 1) for k in range(1, radius + 1)]
    return ReferenceSet(tuple(before), t, tuple(after))


def reference_window(refset: ReferenceSet, frames: Sequence[np.ndarray]) -> np.ndarray:
    """Stack the referenced frames along a new leading axis, in temporal order."""
    idx = refset.indices()
    n = len(frames)
    bad = [i for i in idx if not 0 <= i < n]
    if bad:
        raise DataError(f"reference indices {bad} out of bounds for {n} frames")
    return np.stack([frames[i] for i in idx])
