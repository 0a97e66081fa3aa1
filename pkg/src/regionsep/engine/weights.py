"""Binary weight store ("SDWX" format).

Layout, all little-endian:

    magic   4 bytes  "SDWX"
    version u32      format version, currently 1
    hlen    u64      byte length of the JSON header
    header  UTF-8 JSON {"config": {...}, "tensors": [
                {"name", "dtype": "f32", "shape", "byte_offset"}, ...]}
    payload contiguous float32 tensor data, row-major, in table order;
            byte_offset is relative to the start of the payload section.
"""

import json
import struct

import numpy as np

from .config import DemucsConfig, expected_tensors

__all__ = ["WeightStore", "WeightFormatError", "save_weights", "load_weights",
           "init_weights"]

MAGIC = b"SDWX"
FORMAT_VERSION = 1


class WeightFormatError(ValueError):
    pass


class WeightStore:
    """Named float32 tensors validated against a DemucsConfig."""

    def __init__(self, config, tensors, format_version=FORMAT_VERSION):
        self.config = config
        self.tensors = {
            name: np.ascontiguousarray(t, dtype=np.float32)
            for name, t in tensors.items()
        }
        self.format_version = format_version
        self.validate()

    def validate(self):
        expected = expected_tensors(self.config)
        for name, shape in expected.items():
            if name not in self.tensors:
                raise WeightFormatError(f"missing tensor {name}")
            got = self.tensors[name].shape
            if got != shape:
                raise WeightFormatError(
                    f"tensor {name} has shape {got}, expected {shape}"
                )
        extras = set(self.tensors) - set(expected)
        if extras:
            raise WeightFormatError(f"unexpected tensors: {sorted(extras)}")

    def __getitem__(self, name):
        return self.tensors[name]

    def __eq__(self, other):
        if not isinstance(other, WeightStore):
            return NotImplemented
        return self.config == other.config and all(
            np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors
        )


def init_weights(config, seed=0):
    """Seeded random store for self-tests: uniform(-k, k) with
    k = 1/sqrt(fan_in) (fan_in = input channels x kernel taps; LSTM uses
    1/sqrt(width))."""
    rng = np.random.default_rng(seed)
    tensors = {}
    w = config.lstm_width
    for name, shape in expected_tensors(config).items():
        if name.startswith("lstm"):
            k = 1.0 / np.sqrt(w)
        elif "convt" in name:
            ref = expected_tensors(config)[name.replace(".bias", ".weight")]
            k = 1.0 / np.sqrt(ref[0] * config.kernel)
        elif "conv" in name or "expand" in name:
            ref = expected_tensors(config)[name.replace(".bias", ".weight")]
            k = 1.0 / np.sqrt(ref[1] * (ref[2] if len(ref) == 3 else 1))
        else:
            k = 0.1
        tensors[name] = rng.uniform(-k, k, size=shape).astype(np.float32)
    return WeightStore(config, tensors)


def save_weights(store, path):
    """Write a WeightStore to disk; refuses non-finite tensors."""
    store.validate()
    order = list(expected_tensors(store.config))
    table = []
    offset = 0
    for name in order:
        t = store.tensors[name]
        if not np.all(np.isfinite(t)):
            raise WeightFormatError(f"tensor {name} contains non-finite values")
        table.append(
            {
                "name": name,
                "dtype": "f32",
                "shape": list(t.shape),
                "byte_offset": offset,
            }
        )
        offset += t.nbytes
    header = json.dumps(
        {"config": store.config.to_dict(), "tensors": table}
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", store.format_version))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for name in order:
            fh.write(store.tensors[name].astype("<f4", copy=False).tobytes())
    return path


def load_weights(path):
    """Read an SDWX file back into a validated WeightStore."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise WeightFormatError(f"{path}: not a weight file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise WeightFormatError(f"{path}: unsupported version {version}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        try:
            header = json.loads(fh.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise WeightFormatError(f"{path}: corrupt header ({e})") from e
        config = DemucsConfig.from_dict(header["config"])
        payload = fh.read()
    tensors = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        if entry.get("dtype") != "f32":
            raise WeightFormatError(
                f"{path}: tensor {entry['name']} has unsupported dtype "
                f"{entry.get('dtype')!r}"
            )
        count = int(np.prod(shape)) if shape else 1
        start = entry["byte_offset"]
        stop = start + 4 * count
        if stop > len(payload):
            raise WeightFormatError(
                f"{path}: tensor {entry['name']} payload out of bounds"
            )
        tensors[entry["name"]] = np.frombuffer(
            payload[start:stop], dtype="<f4"
        ).reshape(shape).copy()
    return WeightStore(config, tensors)
