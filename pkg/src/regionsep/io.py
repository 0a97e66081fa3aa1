"""WAV and JSON-lines file I/O.

Audio files are float32 WAV (IEEE float). In memory audio is
(channels, samples); on disk scipy's (samples, channels) layout is used.
"""

import json
import os

import numpy as np
from scipy.io import wavfile

__all__ = ["read_wav", "write_wav", "read_jsonl", "write_jsonl"]


def write_wav(path, audio, sample_rate):
    """Write a (channels, samples) float array as a float32 WAV file."""
    audio = np.asarray(audio)
    if audio.ndim == 1:
        audio = audio[np.newaxis, :]
    if audio.ndim != 2:
        raise ValueError(f"audio must be 1-D or 2-D, got shape {audio.shape}")
    data = np.ascontiguousarray(audio.T, dtype=np.float32)
    wavfile.write(path, int(sample_rate), data)


def read_wav(path):
    """Read a WAV file.

    Returns
    -------
    audio : ndarray (channels, samples), float32
    sample_rate : int
    """
    sample_rate, data = wavfile.read(path)
    if data.ndim == 1:
        data = data[:, np.newaxis]
    if data.dtype == np.int16:
        data = data.astype(np.float32) / 32768.0
    elif data.dtype == np.int32:
        data = data.astype(np.float32) / 2147483648.0
    else:
        data = data.astype(np.float32)
    return np.ascontiguousarray(data.T), sample_rate


def write_jsonl(path, records):
    """Write an iterable of dicts, one JSON document per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def read_jsonl(path):
    """Read a JSON-lines file into a list of dicts."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def ensure_dir(path):
    """Create a directory (and parents) if missing; return the path."""
    os.makedirs(path, exist_ok=True)
    return path
