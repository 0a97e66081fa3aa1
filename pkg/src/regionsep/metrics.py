"""Evaluation metrics: SI-SDR, SI-SDR improvement, and log-mel distance.

All metrics are computed on the first (reference) channel; multichannel
arrays are accepted and reduced to channel 0.
"""

from dataclasses import dataclass, asdict
from functools import lru_cache

import numpy as np

from .dsp import StftConfig, stft

__all__ = [
    "si_sdr",
    "si_sdr_improvement",
    "mel_l2",
    "mel_filterbank",
    "log_mel_spectrogram",
    "EvalRecord",
]

SI_SDR_CAP_DB = 100.0
MEL_LOG_FLOOR = 1e-5


def _ref_channel(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[0]
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D or (channels, samples), got {x.shape}")
    if x.size < 1:
        raise ValueError(f"{name} is empty")
    return x


def si_sdr(estimate, reference, cap_db=SI_SDR_CAP_DB):
    """Scale-invariant signal-to-distortion ratio in dB.

    Both signals are zero-meaned; the reference is scaled by the optimal
    projection coefficient before computing the distortion energy. The
    result is capped to +-cap_db so that perfect reconstructions stay
    finite.

    Parameters
    ----------
    estimate, reference : ndarray
        Equal-length signals; 2-D input uses channel 0.

    Returns
    -------
    float, dB in [-cap_db, +cap_db].
    """
    est = _ref_channel(estimate, "estimate")
    ref = _ref_channel(reference, "reference")
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {ref.shape}")
    if not np.any(ref):
        raise ValueError("reference is all-zero")
    est = est - est.mean()
    ref = ref - ref.mean()
    den = float(ref @ ref)
    if den <= 0.0:
        raise ValueError("reference has no energy after zero-meaning")
    alpha = float(est @ ref) / den
    target = alpha * ref
    err = target - est
    num = float(target @ target)
    ratio = num / (float(err @ err) + 1e-12)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(ratio) if ratio > 0 else -np.inf
    return float(np.clip(db, -cap_db, cap_db))


def si_sdr_improvement(mixture, estimate, reference, cap_db=SI_SDR_CAP_DB):
    """SI-SDR of the estimate minus SI-SDR of the unprocessed mixture."""
    return si_sdr(estimate, reference, cap_db) - si_sdr(mixture, reference, cap_db)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def _mel_filterbank_cached(n_mels, fft_len, sample_rate, fmin, fmax):
    freqs = np.arange(fft_len // 2 + 1) * sample_rate / fft_len
    pts = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2))
    fb = np.zeros((n_mels, freqs.size))
    for i in range(n_mels):
        lo, mid, hi = pts[i], pts[i + 1], pts[i + 2]
        up = (freqs - lo) / max(mid - lo, 1e-12)
        down = (hi - freqs) / max(hi - mid, 1e-12)
        fb[i] = np.maximum(0.0, np.minimum(up, down))
        fb[i] *= 2.0 / (hi - lo)  # unit-area triangles
    return fb


def mel_filterbank(n_mels=80, fft_len=2048, sample_rate=48000, fmin=20.0, fmax=None):
    """Triangular, area-normalized mel filterbank (n_mels, fft_len/2+1)."""
    fmax = float(fmax if fmax is not None else sample_rate / 2)
    return _mel_filterbank_cached(int(n_mels), int(fft_len), int(sample_rate),
                                  float(fmin), fmax).copy()


def log_mel_spectrogram(audio, sample_rate=48000, cfg=None, n_mels=80, fmin=20.0,
                        fmax=None, log_floor=MEL_LOG_FLOOR):
    """log10 mel magnitude spectrogram of channel 0, shape (frames, n_mels)."""
    cfg = cfg or StftConfig()
    x = _ref_channel(audio, "audio")
    spec = stft(x, cfg, sample_rate=sample_rate)
    mag = np.abs(spec.bins[0])
    fb = mel_filterbank(n_mels, cfg.fft_len, sample_rate, fmin, fmax)
    mel = mag @ fb.T
    return np.log10(np.maximum(mel, log_floor))


def mel_l2(estimate, reference, sample_rate=48000, cfg=None, n_mels=80,
           fmin=20.0, fmax=None, log_floor=MEL_LOG_FLOOR):
    """Mean per-frame Euclidean distance between log-mel spectra.

    Returns the mean over frames of ||logmel(est)[t] - logmel(ref)[t]||_2.
    """
    est = _ref_channel(estimate, "estimate")
    ref = _ref_channel(reference, "reference")
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {ref.shape}")
    le = log_mel_spectrogram(est, sample_rate, cfg, n_mels, fmin, fmax, log_floor)
    lr = log_mel_spectrogram(ref, sample_rate, cfg, n_mels, fmin, fmax, log_floor)
    return float(np.mean(np.linalg.norm(le - lr, axis=1)))


@dataclass
class EvalRecord:
    """Per-segment evaluation result with spatial descriptors."""

    segment_id: str
    si_sdr_in: float
    si_sdr_out: float
    si_sdri: float
    mel_l2: float
    mean_angular_distance: float  # degrees, time-averaged between sources
    mean_cartesian_distance: float  # meters
    n_targets: int
    n_interferers: int
    mic_count: int

    def __post_init__(self):
        if abs(self.si_sdri - (self.si_sdr_out - self.si_sdr_in)) > 1e-9:
            raise ValueError(
                "si_sdri must equal si_sdr_out - si_sdr_in "
                f"({self.si_sdri} vs {self.si_sdr_out - self.si_sdr_in})"
            )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})
