"""Input validation helpers shared across the package.

Conventions: multichannel audio is a 2-D float array of shape
(channels, samples); single-channel audio may be passed as a 1-D array
where documented. Validators return a float64 (or float32) ndarray and
raise ValueError with a descriptive message on bad input.
"""

import numpy as np

__all__ = [
    "check_audio",
    "check_mono",
    "check_positive",
    "check_in_range",
    "check_vector3",
]


def check_audio(x, channels=None, dtype=np.float64, name="audio"):
    """Validate a (channels, samples) audio array.

    Parameters
    ----------
    x : array-like
        1-D (promoted to a single channel) or 2-D audio.
    channels : int, optional
        Required channel count.
    dtype : numpy dtype
        Output dtype.
    name : str
        Argument name used in error messages.

    Returns
    -------
    ndarray of shape (channels, samples)
    """
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[np.newaxis, :]
    if x.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got shape {x.shape}")
    if x.shape[0] > x.shape[1] and x.shape[1] > 0 and x.shape[0] > 64:
        # (samples, channels) almost certainly got passed by mistake
        raise ValueError(
            f"{name} looks transposed (shape {x.shape}); expected (channels, samples)"
        )
    if channels is not None and x.shape[0] != channels:
        raise ValueError(
            f"{name} must have {channels} channels, got {x.shape[0]}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(x, dtype=dtype)


def check_mono(x, dtype=np.float64, name="audio"):
    """Validate a single-channel signal, returning a 1-D ndarray."""
    x = np.asarray(x)
    if x.ndim == 2 and x.shape[0] == 1:
        x = x[0]
    if x.ndim != 1:
        raise ValueError(f"{name} must be a 1-D signal, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(x, dtype=dtype)


def check_positive(value, name, strict=True):
    """Require a positive (or non-negative when strict=False) scalar."""
    value = float(value)
    if strict and not value > 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return value


def check_in_range(value, name, low, high):
    """Require low <= value <= high."""
    value = float(value)
    if not (low <= value <= high):
        raise ValueError(f"{name} must be in [{low}, {high}], got {value}")
    return value


def check_vector3(v, name):
    """Validate a finite 3-vector."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return v
