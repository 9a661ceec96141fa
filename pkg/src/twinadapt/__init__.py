"""Domain-adversarial fault diagnosis on digital-twin sequence data.

The package trains a fault classifier for a six-motor robot entirely on
simulated (digital twin) trajectories and adapts it to the "real" robot
with unlabelled data only, using a gradient-reversal domain classifier.
Everything runs on a small from-scratch reverse-mode autodiff core over
numpy; see the README for the CLI walkthrough.
"""

__version__ = "0.1.0"

from .autodiff import Parameter, Tape, Tensor, finite_diff_check, grad_reverse
from .data import (
    CLASS_NAMES,
    Dataset,
    SequenceSample,
    generate_corpus,
    load_dataset,
    save_dataset,
    split,
    standardize,
)
from .metrics import MetricsReport, aggregate
from .models import FeatureExtractorConfig, ModelParams, TcnConfig, init_params
from .training import TrainConfig, RunHistory, alpha, evaluate, fit
from .twin import GapConfig, TwinConfig, simulate_sample

__all__ = [
    "__version__",
    "Parameter",
    "Tape",
    "Tensor",
    "finite_diff_check",
    "grad_reverse",
    "CLASS_NAMES",
    "Dataset",
    "SequenceSample",
    "generate_corpus",
    "load_dataset",
    "save_dataset",
    "split",
    "standardize",
    "MetricsReport",
    "aggregate",
    "FeatureExtractorConfig",
    "ModelParams",
    "TcnConfig",
    "init_params",
    "TrainConfig",
    "RunHistory",
    "alpha",
    "evaluate",
    "fit",
    "GapConfig",
    "TwinConfig",
    "simulate_sample",
]
