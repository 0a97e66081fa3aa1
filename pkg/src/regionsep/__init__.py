"""regionsep: separate moving sound sources by broad spatial region.

The package provides a shoebox scene simulator with moving sources, a
segment/mixture dataset pipeline, an oracle mask-based MVDR beamformer,
a causal multichannel waveform separator with offline and streaming
inference, evaluation metrics, and a command-line interface.
"""

__version__ = "0.1.0"

from .dsp import StftConfig, Spectrogram, stft, istft, fractional_delay
from .sim import (
    ArrayGeometry,
    ArrayPose,
    Trajectory,
    RegionSplit,
    SceneSpec,
    SceneSource,
    sample_trajectory,
    image_source_rir,
    render_moving_source,
    render_scene,
    classify_region,
)
from .datasets import SegmentRecord, MixtureSpec, segment_and_label, make_mixture
from .beamform import (
    MvdrBeamformer,
    ideal_ratio_mask,
    spatial_covariances,
    mvdr_weights,
    apply_mvdr,
)
from .metrics import EvalRecord, si_sdr, si_sdr_improvement, mel_l2
from .engine import (
    DemucsConfig,
    WeightStore,
    CausalDemucs,
    DemucsStreamer,
    DemucsSeparator,
    load_weights,
    save_weights,
    init_weights,
    algorithmic_latency,
)
from .evaluation import ExperimentConfig, evaluate_system, spatial_analysis

__all__ = [
    "StftConfig",
    "Spectrogram",
    "stft",
    "istft",
    "fractional_delay",
    "ArrayGeometry",
    "ArrayPose",
    "Trajectory",
    "RegionSplit",
    "SceneSpec",
    "SceneSource",
    "sample_trajectory",
    "image_source_rir",
    "render_moving_source",
    "render_scene",
    "classify_region",
    "SegmentRecord",
    "MixtureSpec",
    "segment_and_label",
    "make_mixture",
    "MvdrBeamformer",
    "ideal_ratio_mask",
    "spatial_covariances",
    "mvdr_weights",
    "apply_mvdr",
    "EvalRecord",
    "si_sdr",
    "si_sdr_improvement",
    "mel_l2",
    "DemucsConfig",
    "WeightStore",
    "CausalDemucs",
    "DemucsStreamer",
    "DemucsSeparator",
    "load_weights",
    "save_weights",
    "init_weights",
    "algorithmic_latency",
    "ExperimentConfig",
    "evaluate_system",
    "spatial_analysis",
]
