"""Segment datasets and mixture construction.

Rendered recordings are cut into consecutive 3 s windows, classified by
region, and the ambiguous windows (trajectory crossing the region
boundary) are dropped. Mixtures pair target segments with interference
segments under random per-segment gains.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from . import io as rio
from .sim import (
    AMBIGUOUS,
    INTERFERENCE,
    TARGET,
    ArrayGeometry,
    ArrayPose,
    RegionSplit,
    Trajectory,
    classify_region,
)
from .errors import DataError
from .validation import check_audio

__all__ = [
    "SegmentRecord",
    "MixtureSpec",
    "segment_and_label",
    "make_mixture",
    "save_manifest",
    "load_manifest",
    "sample_mixture_spec",
]

SEGMENT_SECONDS = 3.0
GAIN_RANGE_DB = 5.0  # per-segment gains drawn uniform in [-5, +5] dB
MANIFEST_SCHEMA_VERSION = 1


@dataclass
class SegmentRecord:
    """One labeled 3 s clip of a rendered source."""

    segment_id: str
    region: str
    split: RegionSplit
    source_id: str
    trajectory: Trajectory
    rms_dbfs: float
    duration: float = SEGMENT_SECONDS
    sample_rate: int = 48000
    audio_path: str = ""
    audio: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.region not in (TARGET, INTERFERENCE):
            raise ValueError(
                f"segment region must be target or interference, got {self.region!r}"
            )

    @property
    def n_samples(self):
        return int(round(self.duration * self.sample_rate))

    def load_audio(self, base_dir="."):
        """Return the (channels, samples) clip, reading audio_path if needed."""
        if self.audio is not None:
            return self.audio
        if not self.audio_path:
            raise ValueError(f"segment {self.segment_id} has no audio attached")
        audio, sr = rio.read_wav(os.path.join(base_dir, self.audio_path))
        if sr != self.sample_rate:
            raise ValueError(
                f"segment {self.segment_id}: file at {sr} Hz, expected {self.sample_rate}"
            )
        return audio.astype(np.float64)

    def to_dict(self):
        return {
            "type": "segment",
            "segment_id": self.segment_id,
            "region": self.region,
            "split": {"kind": self.split.kind, "boundary": self.split.boundary},
            "source_id": self.source_id,
            "rms_dbfs": self.rms_dbfs,
            "duration": self.duration,
            "sample_rate": self.sample_rate,
            "audio_path": self.audio_path,
            "trajectory": {
                "rate": self.trajectory.rate,
                "positions": np.round(self.trajectory.positions, 6).tolist(),
            },
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            segment_id=d["segment_id"],
            region=d["region"],
            split=RegionSplit(d["split"]["kind"], d["split"]["boundary"]),
            source_id=d["source_id"],
            trajectory=Trajectory(
                np.asarray(d["trajectory"]["positions"], dtype=np.float64),
                d["trajectory"]["rate"],
            ),
            rms_dbfs=d["rms_dbfs"],
            duration=d["duration"],
            sample_rate=d["sample_rate"],
            audio_path=d.get("audio_path", ""),
        )


def segment_and_label(audio, trajectory, array_pose, geometry, split,
                      sample_rate=48000, source_id="src",
                      segment_seconds=SEGMENT_SECONDS):
    """Cut a rendered recording into labeled, non-overlapping segments.

    Windows whose trajectory slice is ambiguous (crosses the region
    boundary) are discarded. A recording shorter than one segment yields
    an empty list.

    Returns
    -------
    list of SegmentRecord with in-memory audio attached.
    """
    audio = check_audio(audio, name="recording")
    seg_len = int(round(segment_seconds * sample_rate))
    n_segments = audio.shape[1] // seg_len
    records = []
    for k in range(n_segments):
        t0, t1 = k * segment_seconds, (k + 1) * segment_seconds
        traj = trajectory.slice(t0, t1)
        label = classify_region(traj, array_pose, geometry, split)
        if label == AMBIGUOUS:
            continue
        clip = audio[:, k * seg_len:(k + 1) * seg_len]
        rms = float(np.sqrt(np.mean(clip ** 2)))
        records.append(
            SegmentRecord(
                segment_id=f"{source_id}_{k:04d}",
                region=label,
                split=split,
                source_id=source_id,
                trajectory=traj,
                rms_dbfs=20.0 * np.log10(max(rms, 1e-12)),
                duration=segment_seconds,
                sample_rate=sample_rate,
                audio=clip.copy(),
            )
        )
    return records


@dataclass
class MixtureSpec:
    """Recipe for one mixture: which segments, at which gains."""

    target_segments: list
    interference_segments: list
    gains_db: list = None  # targets first, then interferers; None -> random
    seed: int = 0

    def __post_init__(self):
        if len(self.target_segments) < 1:
            raise ValueError("mixture needs at least one target segment")
        if len(self.interference_segments) < 1:
            raise ValueError("mixture needs at least one interference segment")
        for seg in self.target_segments:
            if seg.region != TARGET:
                raise ValueError(f"segment {seg.segment_id} is not in the target region")
        for seg in self.interference_segments:
            if seg.region != INTERFERENCE:
                raise ValueError(
                    f"segment {seg.segment_id} is not in the interference region"
                )
        rates = {s.sample_rate for s in self.target_segments + self.interference_segments}
        if len(rates) != 1:
            raise ValueError(f"segments mix sample rates: {sorted(rates)}")
        n = len(self.target_segments) + len(self.interference_segments)
        if self.gains_db is not None and len(self.gains_db) != n:
            raise ValueError(f"need {n} gains, got {len(self.gains_db)}")


def make_mixture(spec, base_dir="."):
    """Build (mixture, target_reference) from a MixtureSpec.

    The reference keeps all channels, matching a model that predicts the
    target at every microphone. Gains default to uniform [-5, +5] dB per
    segment, drawn from spec.seed. If the mixture would clip beyond 1.0
    it is peak-normalized jointly with the reference (same scalar), which
    leaves SI-SDR unchanged.

    Returns
    -------
    mixture, reference : ndarray (channels, samples)
    """
    segments = list(spec.target_segments) + list(spec.interference_segments)
    audios = [seg.load_audio(base_dir) for seg in segments]
    shape = audios[0].shape
    for seg, a in zip(segments, audios):
        if a.shape != shape:
            raise ValueError(
                f"segment {seg.segment_id} has shape {a.shape}, expected {shape}"
            )
    if spec.gains_db is None:
        rng = np.random.default_rng(spec.seed)
        gains_db = rng.uniform(-GAIN_RANGE_DB, GAIN_RANGE_DB, len(segments))
    else:
        gains_db = np.asarray(spec.gains_db, dtype=np.float64)
    scales = 10.0 ** (gains_db / 20.0)
    n_t = len(spec.target_segments)
    reference = sum(s * a for s, a in zip(scales[:n_t], audios[:n_t]))
    interference = sum(s * a for s, a in zip(scales[n_t:], audios[n_t:]))
    mixture = reference + interference
    peak = float(np.max(np.abs(mixture))) if mixture.size else 0.0
    if peak > 1.0:
        mixture = mixture / peak
        reference = reference / peak
    return mixture, reference


def sample_mixture_spec(rng, target_pool, interference_pool, n_targets=1,
                        n_interferers=1, gains_db=None):
    """Draw a MixtureSpec from segment pools without replacement."""
    if len(target_pool) < n_targets:
        raise ValueError(
            f"need {n_targets} target segments, pool has {len(target_pool)}"
        )
    if len(interference_pool) < n_interferers:
        raise ValueError(
            f"need {n_interferers} interference segments, pool has "
            f"{len(interference_pool)}"
        )
    t_idx = rng.choice(len(target_pool), size=n_targets, replace=False)
    i_idx = rng.choice(len(interference_pool), size=n_interferers, replace=False)
    return MixtureSpec(
        target_segments=[target_pool[i] for i in t_idx],
        interference_segments=[interference_pool[i] for i in i_idx],
        gains_db=gains_db,
        seed=int(rng.integers(0, 2 ** 31 - 1)),
    )


def save_manifest(records, manifest_path, array_pose=None, geometry=None,
                  audio_dirname="segments"):
    """Persist segments as WAV files plus a JSON-lines manifest.

    The first manifest line is a header with the schema version, sample
    rate, and (optionally) the array placement used for rendering. Audio
    paths are stored relative to the manifest directory.
    """
    manifest_path = os.path.abspath(manifest_path)
    base = os.path.dirname(manifest_path)
    audio_dir = os.path.join(base, audio_dirname)
    rio.ensure_dir(audio_dir)
    rates = {r.sample_rate for r in records}
    if len(rates) > 1:
        raise ValueError(f"records mix sample rates: {sorted(rates)}")
    header = {
        "type": "header",
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "sample_rate": records[0].sample_rate if records else 48000,
        "n_segments": len(records),
    }
    if array_pose is not None:
        header["array"] = {
            "position": array_pose.position.tolist(),
            "rotation": array_pose.rotation.tolist(),
        }
        if geometry is not None:
            header["array"]["geometry"] = {
                "mic_positions": geometry.mic_positions.tolist(),
                "forward_axis": geometry.forward_axis.tolist(),
                "lateral_axis": geometry.lateral_axis.tolist(),
            }
    lines = [header]
    for rec in records:
        if rec.audio is not None and not rec.audio_path:
            rec.audio_path = os.path.join(audio_dirname, f"{rec.segment_id}.wav")
            rio.write_wav(os.path.join(base, rec.audio_path), rec.audio, rec.sample_rate)
        lines.append(rec.to_dict())
    rio.write_jsonl(manifest_path, lines)
    return manifest_path


def load_manifest(manifest_path):
    """Read a manifest; returns (records, header).

    Records carry audio paths only; call record.load_audio(base_dir) with
    the manifest directory to fetch samples.
    """
    lines = rio.read_jsonl(manifest_path)
    if not lines or lines[0].get("type") != "header":
        raise DataError(f"{manifest_path} does not start with a manifest header")
    header = lines[0]
    if header.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise DataError(
            f"unsupported manifest schema_version {header.get('schema_version')!r}"
        )
    records = [SegmentRecord.from_dict(d) for d in lines[1:] if d.get("type") == "segment"]
    return records, header


def manifest_array(header):
    """Rebuild (ArrayPose, ArrayGeometry) from a manifest header, if present."""
    arr = header.get("array")
    if not arr:
        return None, None
    pose = ArrayPose(
        np.asarray(arr["position"], dtype=np.float64),
        np.asarray(arr.get("rotation", np.eye(3)), dtype=np.float64),
    )
    geo = arr.get("geometry")
    geometry = (
        ArrayGeometry(
            np.asarray(geo["mic_positions"], dtype=np.float64),
            np.asarray(geo.get("forward_axis", (1, 0, 0)), dtype=np.float64),
            np.asarray(geo.get("lateral_axis", (0, 1, 0)), dtype=np.float64),
        )
        if geo
        else None
    )
    return pose, geometry
