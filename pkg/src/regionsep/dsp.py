"""Stateless signal-processing primitives: STFT/iSTFT and fractional delay.

All functions are pure; they never mutate their inputs and are safe to
call concurrently.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StftConfig",
    "Spectrogram",
    "hann_window",
    "stft",
    "istft",
    "fractional_delay",
    "delay_kernel",
]

# Kaiser shape parameter for the windowed-sinc interpolator; ~ -90 dB
# sidelobes, near-allpass below 0.8 * Nyquist.
_KAISER_BETA = 8.6


def hann_window(length):
    """Periodic Hann window (DFT-even), the variant that satisfies exact
    constant overlap-add at hops length/2, length/4, ..."""
    n = np.arange(length, dtype=np.float64)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis parameters.

    hop must divide evenly into the overlap structure for the
    overlap-add inverse to be exact; see `is_cola`.
    """

    window_len: int = 2048
    hop: int = 512
    fft_len: int = 2048
    window: str = "hann"

    def __post_init__(self):
        if self.window != "hann":
            raise ValueError(f"unsupported window {self.window!r}")
        if self.window_len <= 0:
            raise ValueError("window_len must be > 0")
        if not (0 < self.hop <= self.window_len <= self.fft_len):
            raise ValueError(
                "require 0 < hop <= window_len <= fft_len, got "
                f"hop={self.hop} window_len={self.window_len} fft_len={self.fft_len}"
            )

    @property
    def freq_bins(self):
        return self.fft_len // 2 + 1

    def window_values(self):
        return hann_window(self.window_len)

    def is_cola(self, tol=1e-8):
        """True when the analysis window sums to a constant at this hop
        (evaluated numerically over a fully-overlapped interior span)."""
        w = self.window_values()
        n, h = self.window_len, self.hop
        wsum = np.zeros(4 * n)
        for start in range(0, 3 * n, h):
            wsum[start:start + n] += w
        interior = wsum[n:n + h]
        ref = float(np.mean(interior))
        if ref <= 0:
            return False
        return float(np.max(np.abs(interior - ref))) <= tol * ref


@dataclass
class Spectrogram:
    """Complex STFT bins of shape (channels, frames, freq_bins)."""

    bins: np.ndarray
    config: StftConfig
    sample_rate: float
    orig_len: int

    def __post_init__(self):
        if self.bins.ndim != 3:
            raise ValueError(f"bins must be 3-D, got shape {self.bins.shape}")
        if self.bins.shape[2] != self.config.freq_bins:
            raise ValueError(
                f"freq axis {self.bins.shape[2]} != fft_len/2+1 = {self.config.freq_bins}"
            )

    @property
    def channels(self):
        return self.bins.shape[0]

    @property
    def frames(self):
        return self.bins.shape[1]


def _frame_count(padded_len, window_len, hop):
    return (padded_len - window_len) // hop + 1


def _analysis_padding(n_samples, cfg):
    """Zero-padding (left, right) so every original sample sits in the
    constant-overlap interior and the padded length lands exactly on a
    frame boundary."""
    half = cfg.window_len // 2
    last_needed = half + n_samples - 1          # padded index of last original sample
    n_frames = last_needed // cfg.hop + 1       # frames so window sum is complete there
    n_frames = max(n_frames, 1)
    padded = (n_frames - 1) * cfg.hop + cfg.window_len
    right = padded - n_samples - half
    return half, max(right, 0)


def stft(audio, cfg=None, sample_rate=48000):
    """Short-time Fourier transform of multichannel audio.

    Parameters
    ----------
    audio : ndarray (channels, samples) or (samples,)
        Input signal; must be at least one window long.
    cfg : StftConfig, optional
        Defaults to hann 2048 / hop 512 / fft 2048.
    sample_rate : float

    Returns
    -------
    Spectrogram
        bins[c, t, f]; the signal is zero-padded by window_len/2 on both
        ends so that `istft` reconstructs the original length exactly.
    """
    from .validation import check_audio

    cfg = cfg or StftConfig()
    x = check_audio(audio, name="audio")
    n = x.shape[1]
    if n < cfg.window_len:
        raise ValueError(
            f"input too short: {n} samples < window_len {cfg.window_len}"
        )
    left, right = _analysis_padding(n, cfg)
    xp = np.pad(x, ((0, 0), (left, right)))
    n_frames = _frame_count(xp.shape[1], cfg.window_len, cfg.hop)
    idx = np.arange(n_frames)[:, None] * cfg.hop + np.arange(cfg.window_len)[None, :]
    frames = xp[:, idx] * cfg.window_values()[None, None, :]
    bins = np.fft.rfft(frames, n=cfg.fft_len, axis=-1)
    return Spectrogram(bins=bins, config=cfg, sample_rate=sample_rate, orig_len=n)


def istft(spec):
    """Inverse STFT by overlap-add with window-sum normalization.

    Requires a constant-overlap-add configuration; the output has exactly
    the length of the signal passed to `stft`.
    """
    cfg = spec.config
    if not cfg.is_cola():
        raise ValueError(
            f"config window_len={cfg.window_len} hop={cfg.hop} does not satisfy "
            "constant overlap-add; use hop = window_len/2 or window_len/4"
        )
    w = cfg.window_values()
    n_frames = spec.frames
    padded = (n_frames - 1) * cfg.hop + cfg.window_len
    frames = np.fft.irfft(spec.bins, n=cfg.fft_len, axis=-1)[..., : cfg.window_len]
    out = np.zeros((spec.channels, padded), dtype=frames.dtype)
    wsum = np.zeros(padded)
    for t in range(n_frames):
        start = t * cfg.hop
        out[:, start:start + cfg.window_len] += frames[:, t, :]
        wsum[start:start + cfg.window_len] += w
    left = cfg.window_len // 2
    good = wsum > 1e-10
    out[:, good] /= wsum[good]
    result = out[:, left:left + spec.orig_len]
    if result.shape[1] < spec.orig_len:
        result = np.pad(result, ((0, 0), (0, spec.orig_len - result.shape[1])))
    return result


def delay_kernel_bank(fracs, half_len=32):
    """Kaiser-windowed sinc taps for a batch of fractional delays.

    Parameters
    ----------
    fracs : array-like of floats in [0, 1)
        Fractional parts of the delays, one filter per entry.
    half_len : int >= 8
        Half-length of the filter; total length is 2*half_len + 1 and the
        nominal tap for a zero delay sits at index half_len.

    Returns
    -------
    ndarray (len(fracs), 2*half_len + 1); rows with frac == 0 are exact
    unit impulses.
    """
    if half_len < 8:
        raise ValueError(f"filter half_len must be >= 8, got {half_len}")
    fracs = np.atleast_1d(np.asarray(fracs, dtype=np.float64))
    if np.any(fracs < 0) or np.any(fracs >= 1):
        raise ValueError("fractional delays must be in [0, 1)")
    u = np.arange(-half_len, half_len + 1, dtype=np.float64)[None, :] - fracs[:, None]
    taps = np.sinc(u)
    win = np.zeros_like(u)
    inside = np.abs(u) <= half_len
    win[inside] = np.i0(_KAISER_BETA * np.sqrt(1.0 - (u[inside] / half_len) ** 2))
    win /= np.i0(_KAISER_BETA)
    out = taps * win
    zero = fracs == 0.0
    if np.any(zero):
        out[zero] = 0.0
        out[zero, half_len] = 1.0
    return out


def delay_kernel(frac, half_len=32):
    """Single-filter convenience wrapper around `delay_kernel_bank`."""
    return delay_kernel_bank([float(frac)], half_len)[0]


def fractional_delay(audio, delay, half_len=32):
    """Delay a single-channel signal by a (possibly fractional) number of
    samples using windowed-sinc interpolation.

    Integer delays are sample-exact shifts. Output length equals input
    length; samples shifted past the end are discarded and the start is
    zero-filled.

    Parameters
    ----------
    audio : ndarray (samples,)
    delay : float >= 0
        Delay in samples.
    half_len : int >= 8
        Interpolator half-length in taps.
    """
    from .validation import check_mono

    x = check_mono(audio, name="audio")
    delay = float(delay)
    if delay < 0:
        raise ValueError(f"delay must be >= 0, got {delay}")
    if half_len < 8:
        raise ValueError(f"filter half_len must be >= 8, got {half_len}")
    n0 = int(np.floor(delay))
    frac = delay - n0
    n = x.shape[0]
    if frac == 0.0:
        out = np.zeros_like(x)
        if n0 < n:
            out[n0:] = x[: n - n0]
        return out
    taps = delay_kernel(frac, half_len)
    full = np.convolve(x, taps)
    out = np.zeros_like(x)
    # full[m] corresponds to output sample m + n0 - half_len
    src_start = 0
    dst_start = n0 - half_len
    if dst_start < 0:
        src_start = -dst_start
        dst_start = 0
    count = min(n - dst_start, full.shape[0] - src_start)
    if count > 0:
        out[dst_start:dst_start + count] = full[src_start:src_start + count]
    return out
