"""Causal multichannel waveform separator: offline and streaming inference
over a binary weight store.
"""

from .config import DemucsConfig, algorithmic_latency, expected_tensors
from .model import CausalDemucs
from .separator import DemucsSeparator
from .stream import DemucsStreamer
from .weights import (
    WeightFormatError,
    WeightStore,
    init_weights,
    load_weights,
    save_weights,
)

__all__ = [
    "DemucsConfig",
    "algorithmic_latency",
    "expected_tensors",
    "CausalDemucs",
    "DemucsSeparator",
    "DemucsStreamer",
    "WeightFormatError",
    "WeightStore",
    "init_weights",
    "load_weights",
    "save_weights",
]
