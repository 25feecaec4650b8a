from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..autograd import Adam, LrSchedule, Tensor, l1_loss, l2_loss, no_grad
from ..ensemble import gated_fuse
from ..errors import DataError, NumericError
from ..freqloss import fft_loss
from ..net.qenet import MaskNet, QENet
from ..net.weights import WeightStore
from ..rfp import ReferenceSet, TrackMode, detect_candidates, naive_references, select_references
from .config import TrainConfig
from .data import TrainingPair, load_dataset

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Sample:
    sequence: int
    target: int
    top: int
    left: int
    refs: ReferenceSet


@dataclass
class TrainResult:
    model: QENet
    losses: list[float]
    lrs: list[float]
    config: TrainConfig

    @property
    def weights(self) -> WeightStore:
        return WeightStore(self.model.state_dict())

    def log_records(self) -> list[dict]:
        return [{"iteration": i, "loss": l, "lr": r} for i, (l, r) in enumerate(zip(self.losses, self.lrs))]


class ReferenceProvider:
    """Reference sets for every (sequence, target) pair, via RFP or plain adjacency."""

    def __init__(self, pairs: Sequence[TrainingPair], radius: int, track: str, rfp: bool):
        self.radius = radius
        self.rfp = rfp
        self._lengths = [len(p.compressed) for p in pairs]
        self._candidates = [detect_candidates(p.compressed.metadata, TrackMode(track)) if rfp else set() for p in pairs]

    def __call__(self, seq: int, t: int) -> ReferenceSet:
        if self.rfp:
            return select_references(self._lengths[seq], t, self.radius, self._candidates[seq])
        return naive_references(self._lengths[seq], t, self.radius)


def build_stack(frames: np.ndarray, refs: ReferenceSet, top: int, left: int, size: int | None = None) -> np.ndarray:
    """(T, C, H, W) frames -> ((2R+1)*C, h, w) stack of the referenced frames, optionally cropped."""
    stack = frames[refs.indices()]
    if size is not None:
        stack = stack[:, :, top:top + size, left:left + size]
    k, c, h, w = stack.shape
    return stack.reshape(k * c, h, w)


def smoothed(values: Sequence[float], window: int = 25) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    window = max(1, min(window, len(v)))
    return np.convolve(v, np.ones(window) / window, mode="valid")


def compute_loss(pred: Tensor, target: np.ndarray, cfg: TrainConfig) -> Tensor:
    spatial = l1_loss if cfg.loss.spatial == "L1" else l2_loss
    loss = spatial(pred, Tensor(target, dtype=pred.dtype))
    if cfg.loss.fft and cfg.loss.w_fft > 0:
        loss = loss + fft_loss(pred, target, cfg.loss.fft_config()) * cfg.loss.w_fft
    return loss


def train(
    cfg: TrainConfig,
    pairs: Sequence[TrainingPair] | None = None,
    hook: Callable[[int, list[Sample]], None] | None = None,
    dtype=np.float32,
) -> TrainResult:
    """Train STFF+IQE on random patches.

    Patch coordinates and targets come from a seeded generator that never sees
    the reference sets, so toggling ``cfg.rfp`` changes only which frames are
    stacked.
    """
    if pairs is None:
        pairs = load_dataset(cfg.dataset)
    channels = pairs[0].compressed.frames.shape[1]
    net_cfg = cfg.network(channels=channels)
    p = cfg.patch_size
    for pair in pairs:
        if pair.compressed.height < p or pair.compressed.width < p:
            raise DataError(f"sequence {pair.compressed.name} smaller than patch size {p}")

    model = QENet(net_cfg, seed=cfg.seed, dtype=dtype)
    params = model.named_parameters()
    opt = Adam(params)
    schedule = LrSchedule(cfg.base_lr, cfg.iterations)
    refs_for = ReferenceProvider(pairs, cfg.radius, cfg.track, cfg.rfp)
    rng = np.random.default_rng([cfg.seed, 1])
    losses, lrs = [], []

    for it in range(cfg.iterations):
        samples = []
        for _ in range(cfg.batch_size):
            s = int(rng.integers(len(pairs)))
            seq = pairs[s].compressed
            t = int(rng.integers(len(seq)))
            top = int(rng.integers(seq.height - p + 1))
            left = int(rng.integers(seq.width - p + 1))
            samples.append(Sample(s, t, top, left, refs_for(s, t)))
        if hook is not None:
            hook(it, samples)
        stacks = np.stack([build_stack(pairs[x.sequence].compressed.frames, x.refs, x.top, x.left, p) for x in samples])
        gts = np.stack([pairs[x.sequence].truth.frames[x.target, :, x.top:x.top + p, x.left:x.left + p] for x in samples])

        opt.zero_grad()
        loss = compute_loss(model(Tensor(stacks, dtype=dtype)), gts.astype(dtype), cfg)
        value = float(loss.data)
        if not math.isfinite(value):
            raise NumericError(f"loss became {value} at iteration {it}")
        loss.backward()
        lr = schedule.lr_at(it)
        opt.step(lr)
        losses.append(value)
        lrs.append(lr)
        if it % 100 == 0:
            log.info("iter %d loss %.6f lr %.2e", it, value, lr)

    return TrainResult(model, losses, lrs, cfg)


def train_mask_net(
    model1: QENet,
    model2: QENet,
    pairs: Sequence[TrainingPair],
    iterations: int = 200,
    base_lr: float = 1e-3,
    batch_size: int = 4,
    patch_size: int = 32,
    seed: int = 0,
    track: str = "fixed-qp",
    rfp: bool = True,
) -> tuple[MaskNet, list[float]]:
    """Fit the fusion mask with both enhancement networks frozen (L1 to ground truth)."""
    if model1.cfg.radius != model2.cfg.radius:
        raise DataError("fused models must share the reference radius")
    channels = model1.cfg.channels
    net = MaskNet(channels=channels, seed=seed)
    opt = Adam(net.named_parameters())
    schedule = LrSchedule(base_lr, iterations)
    refs_for = ReferenceProvider(pairs, model1.cfg.radius, track, rfp)
    rng = np.random.default_rng([seed, 2])
    r, p = model1.cfg.radius, patch_size
    losses = []
    for it in range(iterations):
        stacks, gts = [], []
        for _ in range(batch_size):
            s = int(rng.integers(len(pairs)))
            seq = pairs[s].compressed
            t = int(rng.integers(len(seq)))
            top = int(rng.integers(seq.height - p + 1))
            left = int(rng.integers(seq.width - p + 1))
            stacks.append(build_stack(seq.frames, refs_for(s, t), top, left, p))
            gts.append(pairs[s].truth.frames[t, :, top:top + p, left:left + p])
        x = Tensor(np.stack(stacks))
        with no_grad():
            y1, y2 = model1(x), model2(x)
        x_t = Tensor(x.data[:, r * channels:(r + 1) * channels])
        opt.zero_grad()
        fused = gated_fuse(y1, y2, net(x_t, y1, y2))
        loss = l1_loss(fused, Tensor(np.stack(gts), dtype=fused.dtype))
        loss.backward()
        opt.step(schedule.lr_at(it))
        losses.append(float(loss.data))
    return net, losses
