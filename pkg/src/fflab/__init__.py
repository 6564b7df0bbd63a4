"""Forward-Forward training lab.

Layer-local goodness optimization with no cross-layer gradients, the
data pipelines and threshold strategies around it, both inference
routes, a matched backprop baseline, and weight/goodness analysis.
"""

__version__ = "0.1.0"

from .activations import ACTIVATIONS, get_activation
from .ffnet import FFNetwork, Polarity, Sample, ff_loss, goodness, train_epoch
from .inference import predict_head, predict_sweep, train_head
from .numerics import AdamState, adam_step, l2_normalize, matmul
from .rng import Rng
from .thresholds import ConstantK, Pyramidal, Scheduled

__all__ = [
    "ACTIVATIONS",
    "AdamState",
    "ConstantK",
    "FFNetwork",
    "Polarity",
    "Pyramidal",
    "Rng",
    "Sample",
    "Scheduled",
    "adam_step",
    "ff_loss",
    "get_activation",
    "goodness",
    "l2_normalize",
    "matmul",
    "predict_head",
    "predict_sweep",
    "train_epoch",
    "train_head",
]
