"""Data ingestion, synthetic degradation, training, inference and evaluation."""

from .config import DegradeConfig, LossSpec, TrainConfig, load_config
from .data import FrameSequence, TrainingPair, load_dataset, load_sequence, synth_clean_sequence, write_sequence
from .degrade import build_synthetic_dataset, synth_degrade
from .enhance import enhance
from .evaluate import evaluate, evaluate_dirs, plot_curves, read_report, write_report
from .train import TrainResult, train, train_mask_net

__all__ = [
    "DegradeConfig",
    "FrameSequence",
    "LossSpec",
    "TrainConfig",
    "TrainResult",
    "TrainingPair",
    "build_synthetic_dataset",
    "enhance",
    "evaluate",
    "evaluate_dirs",
    "load_config",
    "load_dataset",
    "load_sequence",
    "plot_curves",
    "read_report",
    "synth_clean_sequence",
    "synth_degrade",
    "train",
    "train_mask_net",
    "write_report",
    "write_sequence",
]
