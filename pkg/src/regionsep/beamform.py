"""Oracle mask-based MVDR beamforming with the first mic as reference.

The pipeline: ideal ratio masks from ground-truth stems, mask-weighted
spatial covariance estimation for the target and interference-plus-rest,
and the covariance-form (Souden) MVDR filter, which needs no steering
vector. Default operation estimates one covariance per segment; a
block-adaptive mode re-estimates over 1 s blocks with 50 % overlap for
fast-moving sources.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .dsp import Spectrogram, StftConfig, istft, stft
from .validation import check_audio

__all__ = [
    "MaskTensor",
    "CovarianceSet",
    "BeamformerWeights",
    "ideal_ratio_mask",
    "spatial_covariances",
    "mvdr_weights",
    "apply_mvdr",
    "MvdrBeamformer",
]

MASK_EPS = 1e-12
PASSTHROUGH_TRACE = 1e-12


@dataclass
class MaskTensor:
    """Time-frequency mask in [0, 1], shape (frames, freq_bins)."""

    values: np.ndarray
    config: StftConfig

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"mask must be 2-D, got {self.values.shape}")
        if self.values.shape[1] != self.config.freq_bins:
            raise ValueError(
                f"mask has {self.values.shape[1]} bins, config expects "
                f"{self.config.freq_bins}"
            )
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValueError("mask values must lie in [0, 1]")


@dataclass
class CovarianceSet:
    """Per-bin target / noise spatial covariances, (freq_bins, C, C)."""

    phi_s: np.ndarray
    phi_n: np.ndarray
    mask_weight_s: np.ndarray
    mask_weight_n: np.ndarray
    empty_s: np.ndarray  # bins where the mask column summed to ~0
    empty_n: np.ndarray
    config: StftConfig

    @property
    def n_channels(self):
        return self.phi_s.shape[-1]

    def validate(self, herm_tol=1e-10, psd_tol=1e-8):
        """Raise unless both matrices are Hermitian PSD per bin."""
        for name, phi in (("phi_s", self.phi_s), ("phi_n", self.phi_n)):
            asym = np.max(np.abs(phi - phi.conj().swapaxes(-1, -2)))
            scale = max(np.max(np.abs(phi)), 1.0)
            if asym > herm_tol * scale:
                raise ValueError(f"{name} not Hermitian: asymmetry {asym:.2e}")
            eig = np.linalg.eigvalsh(phi)
            tr = np.trace(phi, axis1=-2, axis2=-1).real
            if np.any(eig[:, 0] < -psd_tol * np.maximum(tr, 1e-300)):
                raise ValueError(f"{name} not positive semidefinite")


@dataclass
class BeamformerWeights:
    """Complex filter per bin, (freq_bins, C); applied as w^H y(t, f)."""

    weights: np.ndarray
    ref_channel: int
    config: StftConfig
    passthrough: np.ndarray = field(default=None)

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights.view(np.float64))):
            raise ValueError("beamformer weights contain non-finite entries")
        if self.passthrough is None:
            self.passthrough = np.zeros(self.weights.shape[0], dtype=bool)


def ideal_ratio_mask(target_spec, interference_spec, ref_channel=0):
    """Oracle mask |S| / (|S| + |N| + eps) at the reference channel.

    Both spectrograms must be aligned (same shape and config).
    """
    if target_spec.bins.shape != interference_spec.bins.shape:
        raise ValueError(
            f"spectrogram shape mismatch: {target_spec.bins.shape} vs "
            f"{interference_spec.bins.shape}"
        )
    s = np.abs(target_spec.bins[ref_channel])
    n = np.abs(interference_spec.bins[ref_channel])
    return MaskTensor(s / (s + n + MASK_EPS), target_spec.config)


def spatial_covariances(mixture_spec, mask):
    """Mask-weighted spatial covariance matrices for one segment.

    phi_s(f) = sum_t m(t,f) y y^H / sum_t m(t,f) and phi_n likewise with
    1 - m. Bins whose mask column sums to ~0 get a zero matrix and a flag
    instead of a division by zero.
    """
    m = mask.values if isinstance(mask, MaskTensor) else np.asarray(mask)
    y = mixture_spec.bins  # (C, T, F)
    if m.shape != (y.shape[1], y.shape[2]):
        raise ValueError(
            f"mask shape {m.shape} does not match spectrogram frames/bins "
            f"{(y.shape[1], y.shape[2])}"
        )
    out = {}
    for key, mm in (("s", m), ("n", 1.0 - m)):
        wsum = mm.sum(axis=0)  # (F,)
        phi = np.einsum("tf,atf,btf->fab", mm, y, y.conj(), optimize=True)
        empty = wsum <= MASK_EPS
        denom = np.where(empty, 1.0, wsum)
        phi /= denom[:, None, None]
        phi[empty] = 0.0
        phi = 0.5 * (phi + phi.conj().swapaxes(-1, -2))
        out[key] = (phi, wsum, empty)
    return CovarianceSet(
        phi_s=out["s"][0], phi_n=out["n"][0],
        mask_weight_s=out["s"][1], mask_weight_n=out["n"][1],
        empty_s=out["s"][2], empty_n=out["n"][2],
        config=mixture_spec.config,
    )


def mvdr_weights(cov, ref_channel=0, diagonal_loading=1e-6, condition_limit=1e4):
    """Covariance-form MVDR filter with condition-limited diagonal loading.

    Per bin: w = (phi_n + dI)^{-1} phi_s u / trace((phi_n + dI)^{-1} phi_s)
    with u the reference-channel selector. The loading d is the larger of
    diagonal_loading * trace(phi_n)/C and the amount needed to keep the
    loaded matrix's condition number at or below condition_limit; the
    clamp only touches bins whose noise statistics are too poorly
    estimated to invert safely (it leaves well-conditioned bins alone and
    never affects the distortionless property). Bins whose trace falls
    below the passthrough threshold fall back to w = u and are flagged.
    """
    c = cov.n_channels
    if not 0 <= ref_channel < c:
        raise ValueError(f"ref_channel {ref_channel} out of range for C={c}")
    if condition_limit is not None and condition_limit <= 1:
        raise ValueError("condition_limit must be > 1")
    f_bins = cov.phi_s.shape[0]
    weights = np.zeros((f_bins, c), dtype=np.complex128)
    weights[:, ref_channel] = 1.0
    passthrough = np.ones(f_bins, dtype=bool)

    trace_n = np.trace(cov.phi_n, axis1=-2, axis2=-1).real
    usable = trace_n > 0
    if np.any(usable):
        load = diagonal_loading * trace_n[usable] / c
        if condition_limit is not None and c > 1:
            eig = np.linalg.eigvalsh(cov.phi_n[usable])
            lmin = np.maximum(eig[:, 0], 0.0)
            clamp = (eig[:, -1] - condition_limit * lmin) / (condition_limit - 1.0)
            load = np.maximum(load, np.maximum(clamp, 0.0))
        phi_n = cov.phi_n[usable] + load[:, None, None] * np.eye(c)
        ratio = np.linalg.solve(phi_n, cov.phi_s[usable])
        denom = np.trace(ratio, axis1=-2, axis2=-1)
        ok = np.abs(denom) > PASSTHROUGH_TRACE
        w = ratio[..., ref_channel]
        w[ok] /= denom[ok, None]
        idx = np.where(usable)[0][ok]
        weights[idx] = w[ok]
        passthrough[idx] = False
    return BeamformerWeights(weights, ref_channel, cov.config, passthrough)


def apply_mvdr(mixture, weights, cfg=None, sample_rate=48000):
    """Filter a multichannel mixture down to one channel: s(t,f) = w^H y.

    The STFT config must match the one the weights were computed with.
    """
    cfg = cfg or weights.config
    if cfg != weights.config:
        raise ValueError(
            f"stft config mismatch: weights built with {weights.config}, got {cfg}"
        )
    x = check_audio(mixture, name="mixture")
    if x.shape[0] != weights.weights.shape[1]:
        raise ValueError(
            f"mixture has {x.shape[0]} channels, weights expect "
            f"{weights.weights.shape[1]}"
        )
    spec = stft(x, cfg, sample_rate=sample_rate)
    shat = np.einsum("fc,ctf->tf", weights.weights.conj(), spec.bins)
    mono = Spectrogram(shat[None], cfg, sample_rate, spec.orig_len)
    return istft(mono)[0]


def _frame_blocks(n_frames, block_frames):
    """(start, stop, weight) triangular 50 %-overlap partition over frames."""
    hop = max(block_frames // 2, 1)
    starts = list(range(0, max(n_frames - hop, 1), hop))
    ramp = (np.arange(block_frames) + 0.5) / hop
    tri = np.minimum(ramp, 2.0 - ramp)
    wsum = np.zeros(n_frames)
    spans = []
    for s in starts:
        stop = min(s + block_frames, n_frames)
        spans.append((s, stop))
        wsum[s:stop] += tri[: stop - s]
    return [(s, e, tri[: e - s] / wsum[s:e]) for (s, e) in spans]


class MvdrBeamformer(TransformerMixin, BaseEstimator):
    """Oracle MVDR as an estimator: fit on (mixture, target stem), then
    transform mixtures into a single beamformed channel.

    Parameters
    ----------
    window_len, hop, fft_len : int
        STFT parameters (hann window).
    ref_channel : int
        Distortionless reference microphone (channel 0 by convention).
    diagonal_loading : float
        Loading relative to mean channel power of the noise covariance.
    condition_limit : float or None
        Cap on the loaded noise covariance's condition number; extra
        loading is applied per bin only when the estimate is too
        ill-conditioned to invert safely. None disables the cap.
    block_adaptive : bool
        Re-estimate covariances over `block_seconds` blocks (50 % overlap)
        instead of once per segment.
    sample_rate : int
    """

    def __init__(self, window_len=2048, hop=512, fft_len=2048, ref_channel=0,
                 diagonal_loading=1e-6, condition_limit=1e4, block_adaptive=False,
                 block_seconds=1.0, sample_rate=48000):
        self.window_len = window_len
        self.hop = hop
        self.fft_len = fft_len
        self.ref_channel = ref_channel
        self.diagonal_loading = diagonal_loading
        self.condition_limit = condition_limit
        self.block_adaptive = block_adaptive
        self.block_seconds = block_seconds
        self.sample_rate = sample_rate

    def _config(self):
        return StftConfig(self.window_len, self.hop, self.fft_len)

    def fit(self, X, y=None, interference=None):
        """Estimate masks, covariances and filters from oracle stems.

        Parameters
        ----------
        X : ndarray (channels, samples)
            The mixture.
        y : ndarray (channels, samples)
            The target stem. When `interference` is omitted it defaults
            to X - y (exact when the mixture is the plain sum).
        interference : ndarray, optional
            Explicit interference stem.
        """
        X = check_audio(X, name="mixture")
        if y is None:
            raise ValueError("fit requires the target stem as y")
        y = check_audio(y, channels=X.shape[0], name="target stem")
        if y.shape != X.shape:
            raise ValueError(f"target shape {y.shape} != mixture shape {X.shape}")
        if interference is None:
            interference = X - y
        interference = check_audio(interference, channels=X.shape[0],
                                   name="interference stem")
        cfg = self._config()
        mix_spec = stft(X, cfg, sample_rate=self.sample_rate)
        tgt_spec = stft(y, cfg, sample_rate=self.sample_rate)
        int_spec = stft(interference, cfg, sample_rate=self.sample_rate)
        self.mask_ = ideal_ratio_mask(tgt_spec, int_spec, self.ref_channel)
        self.n_channels_ = X.shape[0]
        if not self.block_adaptive:
            self.covariances_ = spatial_covariances(mix_spec, self.mask_)
            self.weights_ = mvdr_weights(self.covariances_, self.ref_channel,
                                         self.diagonal_loading, self.condition_limit)
        else:
            block_frames = max(
                int(round(self.block_seconds * self.sample_rate / cfg.hop)), 2
            )
            self.blocks_ = []
            for start, stop, w in _frame_blocks(mix_spec.frames, block_frames):
                sub = Spectrogram(
                    mix_spec.bins[:, start:stop], cfg, self.sample_rate,
                    mix_spec.orig_len,
                )
                cov = spatial_covariances(
                    sub, self.mask_.values[start:stop]
                )
                weights = mvdr_weights(cov, self.ref_channel,
                                       self.diagonal_loading, self.condition_limit)
                self.blocks_.append((start, stop, w, weights))
        return self

    def transform(self, X):
        """Beamform a mixture; returns (1, samples)."""
        if not hasattr(self, "mask_"):
            raise ValueError("MvdrBeamformer is not fitted")
        X = check_audio(X, channels=self.n_channels_, name="mixture")
        cfg = self._config()
        if not self.block_adaptive:
            out = apply_mvdr(X, self.weights_, cfg, self.sample_rate)
            return out[None, :]
        spec = stft(X, cfg, sample_rate=self.sample_rate)
        shat = np.zeros((spec.frames, cfg.freq_bins), dtype=np.complex128)
        for start, stop, w, weights in self.blocks_:
            stop = min(stop, spec.frames)
            if stop <= start:
                continue
            part = np.einsum(
                "fc,ctf->tf", weights.weights.conj(), spec.bins[:, start:stop]
            )
            shat[start:stop] += w[: stop - start, None] * part
        mono = Spectrogram(shat[None], cfg, self.sample_rate, spec.orig_len)
        return istft(mono)[:1]
