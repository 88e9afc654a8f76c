"""Real-time low-latency music source separation.

A causal streaming pipeline (STFT analysis, a lightweight recurrent
U-style network, overlap-add synthesis) with bit-exact streaming state,
half-precision weights, a binary weight container, separation metrics,
and a benchmark harness.
"""

from .config import SAMPLE_RATE, ModelConfig, StftConfig
from .estimator import StemSeparator
from .model import ModelGraph, build_model, parameter_count, parameter_spec
from .streaming import SeparationStream, StreamClosedError, separate, separate_offline
from .weights import WeightSet, load, random_init, save, to_f16

__version__ = "0.1.0"

__all__ = [
    "SAMPLE_RATE",
    "ModelConfig",
    "StftConfig",
    "ModelGraph",
    "build_model",
    "parameter_count",
    "parameter_spec",
    "SeparationStream",
    "StreamClosedError",
    "separate",
    "separate_offline",
    "WeightSet",
    "load",
    "random_init",
    "save",
    "to_f16",
    "StemSeparator",
    "__version__",
]
