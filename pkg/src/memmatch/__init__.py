"""Memory matching networks for binary DNA sequence classification."""

from .data import PWM, Dataset, SequenceRecord, consensus_pwm, generate_synthetic, load_dataset, save_dataset
from .evaluation import aggregate, paired_ttest, roc_auc
from .model import ForwardTrace, HyperParams, ModelParams, forward
from .training import GridSpec, TrainConfig, fit, grid_search

__version__ = "0.1.0"

__all__ = [
    "PWM",
    "Dataset",
    "ForwardTrace",
    "GridSpec",
    "HyperParams",
    "ModelParams",
    "SequenceRecord",
    "TrainConfig",
    "aggregate",
    "consensus_pwm",
    "fit",
    "forward",
    "generate_synthetic",
    "grid_search",
    "load_dataset",
    "paired_ttest",
    "roc_auc",
    "save_dataset",
]
