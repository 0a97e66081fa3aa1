"""Shoebox scene simulation with moving sources.

Generates multichannel recordings of sources moving through a
reverberant rectangular room: image-source impulse responses, block-wise
time-varying convolution with crossfades, trajectory sampling, and the
classification of trajectories into target/interference regions.

World coordinates are room coordinates: the room spans [0, L] on each
axis. The array frame is defined by an ArrayPose (position + rotation);
inside the array frame `forward_axis` points ahead of the rig and
`lateral_axis` points to the right. "Right of the array" (positive
lateral coordinate) is the target half-space of the left/right split.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve

from .dsp import delay_kernel_bank
from .errors import DataError
from .validation import check_audio, check_mono, check_positive, check_vector3

__all__ = [
    "TARGET",
    "INTERFERENCE",
    "AMBIGUOUS",
    "ArrayGeometry",
    "ArrayPose",
    "Trajectory",
    "RegionSplit",
    "SceneSource",
    "SceneSpec",
    "sample_trajectory",
    "image_source_rir",
    "render_moving_source",
    "render_scene",
    "classify_region",
    "synthetic_speech",
    "scene_to_dict",
    "scene_from_dict",
    "load_scene_file",
]

TARGET = "target"
INTERFERENCE = "interference"
AMBIGUOUS = "ambiguous"

TRAJECTORY_RATE = 240.0  # Hz, position samples per second
SCENE_SCHEMA_VERSION = 1


@dataclass
class ArrayGeometry:
    """Microphone positions in the array frame.

    Microphone 0 is the reference channel everywhere in the toolkit.
    """

    mic_positions: np.ndarray
    forward_axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    lateral_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))

    def __post_init__(self):
        self.mic_positions = np.atleast_2d(np.asarray(self.mic_positions, dtype=np.float64))
        if self.mic_positions.ndim != 2 or self.mic_positions.shape[1] != 3:
            raise ValueError("mic_positions must have shape (mics, 3)")
        if self.mic_positions.shape[0] < 1:
            raise ValueError("need at least one microphone")
        if not np.all(np.isfinite(self.mic_positions)):
            raise ValueError("mic_positions contain non-finite values")
        self.forward_axis = _unit(check_vector3(self.forward_axis, "forward_axis"))
        self.lateral_axis = _unit(check_vector3(self.lateral_axis, "lateral_axis"))

    @property
    def n_mics(self):
        return self.mic_positions.shape[0]

    def subset_indices(self, count):
        """Preset mic subsets for the default paired-circle rig.

        2 -> the front pair, 4 -> front and back pairs, 8 -> all mics.
        Channel 0 is always kept first.
        """
        presets = {2: [0, 1], 4: [0, 1, 4, 5], 8: list(range(8))}
        if count == self.n_mics:
            return list(range(self.n_mics))
        if count not in presets:
            raise ValueError(f"no preset subset of {count} mics for this geometry")
        idx = presets[count]
        if max(idx) >= self.n_mics:
            raise ValueError(f"geometry has only {self.n_mics} mics")
        return idx


def binaural_rig(radius=0.09, pair_spacing=0.015):
    """Default 8-mic array: 4 binaural pairs on a horizontal circle.

    Pair centers sit at 0/90/180/270 degrees from the forward axis at
    `radius` meters; the two mics of a pair are `pair_spacing` apart
    along the circle tangent. Mic 0 is the first mic of the front pair.
    """
    forward = np.array([1.0, 0.0, 0.0])
    lateral = np.array([0.0, 1.0, 0.0])
    mics = []
    for deg in (0.0, 90.0, 180.0, 270.0):
        th = np.deg2rad(deg)
        center = radius * (np.cos(th) * forward + np.sin(th) * lateral)
        tangent = -np.sin(th) * forward + np.cos(th) * lateral
        mics.append(center - 0.5 * pair_spacing * tangent)
        mics.append(center + 0.5 * pair_spacing * tangent)
    return ArrayGeometry(np.array(mics), forward, lateral)


@dataclass
class ArrayPose:
    """Rigid placement of the array in the room.

    `rotation` columns are the array-frame basis vectors expressed in
    world coordinates (world = position + rotation @ local).
    """

    position: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        self.position = check_vector3(self.position, "array position")
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        if self.rotation.shape != (3, 3):
            raise ValueError("rotation must be a 3x3 matrix")
        if not np.allclose(self.rotation @ self.rotation.T, np.eye(3), atol=1e-6):
            raise ValueError("rotation must be orthonormal")

    @classmethod
    def yaw(cls, position, degrees):
        """Pose rotated by `degrees` around the vertical axis."""
        th = np.deg2rad(degrees)
        rot = np.array(
            [
                [np.cos(th), -np.sin(th), 0.0],
                [np.sin(th), np.cos(th), 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
        return cls(np.asarray(position, dtype=np.float64), rot)

    def to_local(self, points):
        """World points (N, 3) -> array-frame coordinates."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return (pts - self.position) @ self.rotation

    def to_world(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return pts @ self.rotation.T + self.position


@dataclass
class Trajectory:
    """Positions of a moving point sampled at a fixed rate (default 240 Hz)."""

    positions: np.ndarray
    rate: float = TRAJECTORY_RATE

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=np.float64))
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("positions must have shape (samples, 3)")
        if self.positions.shape[0] < 1:
            raise ValueError("trajectory needs at least one sample")
        check_positive(self.rate, "trajectory rate")

    @property
    def n_samples(self):
        return self.positions.shape[0]

    @property
    def timestamps(self):
        return np.arange(self.n_samples) / self.rate

    @property
    def duration(self):
        """Nominal time span covered: n/rate seconds (each position sample
        stands for one 1/rate interval, so 720 samples at 240 Hz cover 3 s)."""
        return self.n_samples / self.rate

    def position_at(self, t):
        """Linearly interpolated position at time(s) t (clamped to the span)."""
        t = np.asarray(t, dtype=np.float64)
        x = np.clip(t * self.rate, 0.0, self.n_samples - 1)
        i0 = np.floor(x).astype(int)
        i1 = np.minimum(i0 + 1, self.n_samples - 1)
        frac = (x - i0)[..., None]
        return (1.0 - frac) * self.positions[i0] + frac * self.positions[i1]

    def slice(self, start_s, end_s):
        """Sub-trajectory covering [start_s, end_s)."""
        i0 = int(round(start_s * self.rate))
        i1 = int(round(end_s * self.rate))
        i0 = max(i0, 0)
        i1 = min(i1, self.n_samples)
        if i1 <= i0:
            raise ValueError("empty trajectory slice")
        return Trajectory(self.positions[i0:i1].copy(), self.rate)


@dataclass(frozen=True)
class RegionSplit:
    """Spatial subdivision: 'left_right' half-spaces or 'near_far' with a
    radial boundary (target = right side, respectively far field)."""

    kind: str = "left_right"
    boundary: float = 0.7

    def __post_init__(self):
        if self.kind not in ("left_right", "near_far"):
            raise ValueError(f"unknown split kind {self.kind!r}")
        if not self.boundary > 0:
            raise ValueError("near/far boundary must be > 0")


@dataclass
class SceneSource:
    """A mono source signal tied to a movement path."""

    trajectory: Trajectory
    audio: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.audio = check_mono(self.audio, name=f"source audio {self.name!r}")


@dataclass
class SceneSpec:
    """Everything needed to render one acoustic scene."""

    room_dims: np.ndarray
    sources: list
    array_pose: ArrayPose
    geometry: ArrayGeometry = field(default_factory=binaural_rig)
    absorption: np.ndarray = 0.7
    max_image_order: int = 2
    speed_of_sound: float = 343.0
    sample_rate: int = 48000

    def __post_init__(self):
        self.room_dims = check_vector3(self.room_dims, "room_dims")
        if np.any(self.room_dims <= 0):
            raise ValueError("room_dims must be positive")
        self.absorption = _absorption_vector(self.absorption)
        if self.max_image_order < 0:
            raise ValueError("max_image_order must be >= 0")
        check_positive(self.speed_of_sound, "speed_of_sound")
        check_positive(self.sample_rate, "sample_rate")
        for mic in self.mic_world_positions():
            _check_inside(mic, self.room_dims, "microphone")
        for src in self.sources:
            pts = src.trajectory.positions
            if np.any(pts < 0) or np.any(pts > self.room_dims):
                raise ValueError(f"source {src.name!r} trajectory leaves the room")

    @property
    def n_mics(self):
        return self.geometry.n_mics

    def mic_world_positions(self):
        return self.array_pose.to_world(self.geometry.mic_positions)


def _unit(v):
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("axis vector must be nonzero")
    return v / n


def _absorption_vector(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 0:
        a = np.full(6, float(a))
    if a.shape != (6,):
        raise ValueError("absorption must be a scalar or 6 per-surface values")
    if np.any(a < 0) or np.any(a > 1):
        raise ValueError("absorption coefficients must be in [0, 1]")
    return a


def _check_inside(point, dims, what):
    if np.any(point < 0) or np.any(point > dims):
        raise ValueError(f"{what} position {point} outside room {dims}")


def sample_trajectory(rng_seed, bounds, duration, max_speed, rate=TRAJECTORY_RATE,
                      waypoint_interval=1.5):
    """Sample a smooth random walk inside a box.

    Waypoints are drawn as a bounded random walk, interpolated with a
    cubic spline at `rate`, then post-processed so that every
    consecutive-sample displacement is at most max_speed/rate and every
    sample stays inside `bounds`.

    Parameters
    ----------
    rng_seed : int
    bounds : array-like (2, 3)
        [lower, upper] corners of the allowed box (meters).
    duration : float, seconds
    max_speed : float, m/s (0 gives a constant position)
    rate : float, Hz

    Returns
    -------
    Trajectory with round(duration * rate) samples.
    """
    bounds = np.asarray(bounds, dtype=np.float64)
    if bounds.shape != (2, 3):
        raise ValueError("bounds must have shape (2, 3)")
    lo, hi = bounds
    if np.any(hi < lo):
        raise ValueError(f"degenerate bounds: upper {hi} < lower {lo}")
    duration = check_positive(duration, "duration")
    if max_speed < 0:
        raise ValueError("max_speed must be >= 0")
    n = int(round(duration * rate))
    if n < 1:
        raise ValueError("duration too short for one trajectory sample")
    rng = np.random.default_rng(rng_seed)
    start = rng.uniform(lo, hi)
    if max_speed == 0:
        return Trajectory(np.tile(start, (n, 1)), rate)

    n_way = max(int(np.ceil(duration / waypoint_interval)) + 2, 4)
    way_t = np.arange(n_way) * waypoint_interval
    way = np.empty((n_way, 3))
    way[0] = start
    for i in range(1, n_way):
        step_len = rng.uniform(0.0, 0.6 * max_speed * waypoint_interval)
        direction = rng.standard_normal(3)
        direction /= max(np.linalg.norm(direction), 1e-12)
        cand = way[i - 1] + step_len * direction
        # reflect once off each wall, then clamp
        cand = np.where(cand < lo, 2 * lo - cand, cand)
        cand = np.where(cand > hi, 2 * hi - cand, cand)
        way[i] = np.clip(cand, lo, hi)

    t = np.arange(n) / rate
    pts = CubicSpline(way_t, way, axis=0)(t)

    # enforce the speed limit and the box exactly, step by step
    smax = max_speed / rate
    out = np.empty_like(pts)
    out[0] = np.clip(pts[0], lo, hi)
    for i in range(1, n):
        step = pts[i] - out[i - 1]
        d = np.linalg.norm(step)
        if d > smax:
            step *= (smax / d) * (1.0 - 1e-12)
        out[i] = np.clip(out[i - 1] + step, lo, hi)
    return Trajectory(out, rate)


def _axis_images(length, coord, max_order, beta_lo, beta_hi):
    """Per-axis image coordinates with reflection attenuation.

    Images across walls at 0 and `length`: coordinate 2*m*length +/- coord,
    hitting the lower wall |m - p| times and the upper wall |m| times,
    with axis order |2m - p|.
    """
    entries = []
    for p in (0, 1):
        m_lo = -((max_order - p) // 2)
        m_hi = (max_order + p) // 2
        for m in range(m_lo, m_hi + 1):
            order = abs(2 * m - p)
            if order > max_order:
                continue
            pos = 2.0 * m * length + (coord if p == 0 else -coord)
            att = (beta_lo ** abs(m - p)) * (beta_hi ** abs(m))
            entries.append((pos, order, att))
    return entries


def image_source_rir(room_dims, src_pos, mic_pos, max_order, sample_rate=48000,
                     absorption=0.7, speed_of_sound=343.0, distance_floor=0.1,
                     filter_half_len=32):
    """Image-source impulse response between one source and one microphone.

    Each image contributes a fractional-delay impulse with amplitude
    reflection_product / max(distance, distance_floor) at delay
    distance / speed_of_sound.

    Returns
    -------
    ndarray, the impulse response at `sample_rate`.
    """
    room_dims = check_vector3(room_dims, "room_dims")
    src_pos = check_vector3(src_pos, "source position")
    mic_pos = check_vector3(mic_pos, "microphone position")
    _check_inside(src_pos, room_dims, "source")
    _check_inside(mic_pos, room_dims, "microphone")
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    absorption = _absorption_vector(absorption)
    images, amps = _enumerate_images(room_dims, src_pos, max_order, absorption)
    dists = np.linalg.norm(images - mic_pos, axis=1)
    delays = dists / speed_of_sound * sample_rate
    gains = amps / np.maximum(dists, distance_floor)
    return _rir_bank(delays[None, :], gains[None, :], filter_half_len)[0]


def _enumerate_images(room_dims, src_pos, max_order, absorption):
    beta = np.sqrt(1.0 - absorption)
    per_axis = [
        _axis_images(room_dims[a], src_pos[a], max_order, beta[2 * a], beta[2 * a + 1])
        for a in range(3)
    ]
    positions, amplitudes = [], []
    for x, ox, ax in per_axis[0]:
        for y, oy, ay in per_axis[1]:
            if ox + oy > max_order:
                continue
            for z, oz, az in per_axis[2]:
                if ox + oy + oz > max_order:
                    continue
                positions.append((x, y, z))
                amplitudes.append(ax * ay * az)
    return np.asarray(positions), np.asarray(amplitudes)


def _rir_bank(delays, gains, half_len):
    """Multichannel impulse response from per-(channel, arrival) delays.

    Parameters
    ----------
    delays, gains : ndarray (channels, arrivals), delays in samples >= 0.

    Returns
    -------
    ndarray (channels, length); arrivals whose delay is within 1e-9 of an
    integer are placed exactly, the rest via windowed-sinc interpolation.
    """
    delays = np.atleast_2d(delays)
    gains = np.atleast_2d(gains)
    n_ch = delays.shape[0]
    length = int(np.ceil(delays.max())) + 2 * half_len + 2
    pad = np.zeros((n_ch, length + 2 * half_len))
    rows, d_flat, g_flat = [], delays.ravel(), gains.ravel()
    rows = np.repeat(np.arange(n_ch), delays.shape[1])
    live = g_flat != 0.0
    rows, d_flat, g_flat = rows[live], d_flat[live], g_flat[live]
    n0 = np.floor(d_flat).astype(int)
    frac = d_flat - n0
    snap = (frac < 1e-9) | (frac > 1.0 - 1e-9)
    if np.any(snap):
        idx = n0[snap] + (frac[snap] > 0.5)
        np.add.at(pad, (rows[snap], idx + half_len), g_flat[snap])
    rest = ~snap
    if np.any(rest):
        taps = delay_kernel_bank(frac[rest], half_len) * g_flat[rest, None]
        cols = n0[rest, None] + np.arange(2 * half_len + 1)[None, :]
        np.add.at(pad, (rows[rest, None], cols), taps)
    return pad[:, half_len:half_len + length]


def _crossfade_windows(n_samples, block, hop):
    """Per-block triangular weights normalized to an exact partition of
    unity over [0, n_samples)."""
    n_blocks = max(int(np.ceil(n_samples / hop)), 1)
    ramp = (np.arange(block) + 0.5) / hop
    tri = np.minimum(ramp, 2.0 - ramp)
    wsum = np.zeros(n_samples)
    spans = []
    for b in range(n_blocks):
        start = b * hop
        stop = min(start + block, n_samples)
        spans.append((start, stop))
        wsum[start:stop] += tri[: stop - start]
    windows = []
    for (start, stop) in spans:
        windows.append(tri[: stop - start] / wsum[start:stop])
    return spans, windows


def render_moving_source(scene, source_index, block_seconds=0.032):
    """Render one moving source to all microphones.

    Impulse responses are recomputed for every 32 ms block (50 % overlap)
    at the source position of the block center; the triangular block
    windows form an exact partition of unity, so a static trajectory
    reproduces ordinary convolution.

    Returns
    -------
    ndarray (n_mics, n_samples) matching the source audio length.
    """
    src = scene.sources[source_index]
    fs = scene.sample_rate
    x = src.audio
    n = x.shape[0]
    if n == 0:
        return np.zeros((scene.n_mics, 0))
    if src.trajectory.duration + 1e-9 < n / fs:
        raise ValueError(
            f"trajectory covers {src.trajectory.duration:.3f}s but audio lasts "
            f"{n / fs:.3f}s"
        )
    block = max(int(round(block_seconds * fs)), 2)
    hop = block // 2
    spans, windows = _crossfade_windows(n, block, hop)
    mics = scene.mic_world_positions()
    out = np.zeros((scene.n_mics, n))
    half = 32
    for (start, stop), w in zip(spans, windows):
        t_center = (start + hop) / fs
        pos = src.trajectory.position_at(t_center)
        images, amps = _enumerate_images(
            scene.room_dims, pos, scene.max_image_order, scene.absorption
        )
        dists = np.linalg.norm(images[None, :, :] - mics[:, None, :], axis=2)
        delays = dists / scene.speed_of_sound * fs
        gains = amps[None, :] / np.maximum(dists, 0.1)
        rirs = _rir_bank(delays, gains, half)
        seg = x[start:stop] * w
        mixed = fftconvolve(seg[None, :], rirs, axes=1)
        stop_out = min(start + mixed.shape[1], n)
        out[:, start:stop_out] += mixed[:, : stop_out - start]
    return out


def render_scene(scene, return_stems=False):
    """Render all sources and sum them (sources are independent, so the
    sum equals rendering the combined scene).

    Returns
    -------
    mix : ndarray (n_mics, n_samples)
    stems : list of per-source renderings, only when return_stems=True
    """
    if not scene.sources:
        raise ValueError("scene has no sources")
    lengths = {s.audio.shape[0] for s in scene.sources}
    if len(lengths) != 1:
        raise ValueError("all source signals must have equal length")
    stems = [render_moving_source(scene, i) for i in range(len(scene.sources))]
    mix = np.sum(stems, axis=0)
    if return_stems:
        return mix, stems
    return mix


def classify_region(trajectory, array_pose, geometry, split):
    """Classify a trajectory window as target / interference / ambiguous.

    left_right: the sign of the lateral (rightward) coordinate in the
    array frame must be positive for every sample to be target, negative
    for interference. near_far: distance from the array origin beyond the
    boundary is target (far field), inside is interference. Windows that
    touch both sides, or sit exactly on the boundary, are ambiguous.
    """
    positions = trajectory.positions if isinstance(trajectory, Trajectory) else np.atleast_2d(trajectory)
    if positions.shape[0] == 0:
        raise ValueError("empty trajectory window")
    local = array_pose.to_local(positions)
    if split.kind == "left_right":
        lat = local @ geometry.lateral_axis
        if np.all(lat > 0):
            return TARGET
        if np.all(lat < 0):
            return INTERFERENCE
        return AMBIGUOUS
    dist = np.linalg.norm(local, axis=1)
    if np.all(dist > split.boundary):
        return TARGET
    if np.all(dist < split.boundary):
        return INTERFERENCE
    return AMBIGUOUS


def synthetic_speech(seed, duration, sample_rate=48000):
    """Speech-like test signal: harmonic carrier with a wandering pitch,
    syllabic amplitude modulation with pauses, plus a breathy noise floor.

    Useful wherever real speech recordings are not available; any folder
    of mono WAV files can be used instead.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    f0 = 120.0 + 60.0 * rng.random()
    drift = np.cumsum(rng.standard_normal(n)) / sample_rate
    drift = 12.0 * drift / max(np.max(np.abs(drift)), 1e-9)
    inst_f = f0 + drift
    phase = 2 * np.pi * np.cumsum(inst_f) / sample_rate
    voiced = np.zeros(n)
    for h, a in ((1, 1.0), (2, 0.6), (3, 0.45), (4, 0.3), (6, 0.2), (9, 0.12), (14, 0.07)):
        voiced += a * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
    noise = rng.standard_normal(n)
    # syllabic envelope ~4 Hz with hard pauses
    env_len = max(n // 512, 8)
    env = np.abs(rng.standard_normal(env_len))
    env = np.convolve(env, np.hanning(5), mode="same")
    env = np.interp(np.linspace(0, env_len - 1, n), np.arange(env_len), env)
    gate = (env > np.quantile(env, 0.3)).astype(float)
    gate = np.convolve(gate, np.hanning(int(0.02 * sample_rate) + 1), mode="same")
    gate /= max(gate.max(), 1e-9)
    sig = (voiced + 0.25 * noise) * env * gate
    peak = np.max(np.abs(sig))
    return (0.5 * sig / max(peak, 1e-9)).astype(np.float64)


# ---------------------------------------------------------------------------
# scene files


def scene_to_dict(scene, audio_refs=None):
    """SceneSpec -> JSON-serializable dict (schema_version 1).

    audio_refs, when given, maps source index -> string stored in place
    of inline samples (e.g. a WAV path).
    """
    sources = []
    for i, src in enumerate(scene.sources):
        entry = {
            "name": src.name,
            "trajectory": {
                "rate": src.trajectory.rate,
                "positions": np.round(src.trajectory.positions, 6).tolist(),
            },
        }
        if audio_refs and i in audio_refs:
            entry["audio"] = audio_refs[i]
        else:
            entry["audio"] = {"inline": src.audio.tolist()}
        sources.append(entry)
    return {
        "schema_version": SCENE_SCHEMA_VERSION,
        "room_dims": scene.room_dims.tolist(),
        "absorption": scene.absorption.tolist(),
        "max_image_order": int(scene.max_image_order),
        "speed_of_sound": float(scene.speed_of_sound),
        "sample_rate": int(scene.sample_rate),
        "array": {
            "position": scene.array_pose.position.tolist(),
            "rotation": scene.array_pose.rotation.tolist(),
            "geometry": {
                "mic_positions": scene.geometry.mic_positions.tolist(),
                "forward_axis": scene.geometry.forward_axis.tolist(),
                "lateral_axis": scene.geometry.lateral_axis.tolist(),
            },
        },
        "sources": sources,
    }


def scene_from_dict(doc, base_dir="."):
    """Dict (schema_version 1) -> SceneSpec.

    Source audio entries may be an {"inline": [...]} sample list, a WAV
    path string (relative to base_dir), or {"synthetic": {seed, duration}}.
    Trajectories may be explicit positions or {"sample": {...}} with
    sample_trajectory arguments.
    """
    from .io import read_wav
    import os

    version = doc.get("schema_version")
    if version != SCENE_SCHEMA_VERSION:
        raise DataError(f"unsupported scene schema_version {version!r}")
    sample_rate = int(doc.get("sample_rate", 48000))
    array = doc.get("array", {})
    pose = ArrayPose(
        np.asarray(array.get("position", (0, 0, 0)), dtype=np.float64),
        np.asarray(array.get("rotation", np.eye(3)), dtype=np.float64),
    )
    geo = array.get("geometry")
    geometry = (
        ArrayGeometry(
            np.asarray(geo["mic_positions"], dtype=np.float64),
            np.asarray(geo.get("forward_axis", (1, 0, 0)), dtype=np.float64),
            np.asarray(geo.get("lateral_axis", (0, 1, 0)), dtype=np.float64),
        )
        if geo
        else binaural_rig()
    )
    sources = []
    for i, entry in enumerate(doc.get("sources", [])):
        audio_spec = entry.get("audio")
        if isinstance(audio_spec, str):
            audio, sr = read_wav(os.path.join(base_dir, audio_spec))
            if sr != sample_rate:
                raise ValueError(
                    f"source {i}: file at {sr} Hz but scene is {sample_rate} Hz"
                )
            audio = audio[0]
        elif isinstance(audio_spec, dict) and "inline" in audio_spec:
            audio = np.asarray(audio_spec["inline"], dtype=np.float64)
        elif isinstance(audio_spec, dict) and "synthetic" in audio_spec:
            syn = audio_spec["synthetic"]
            audio = synthetic_speech(
                int(syn.get("seed", 0)), float(syn["duration"]), sample_rate
            )
        else:
            raise ValueError(f"source {i}: unrecognized audio spec {audio_spec!r}")
        traj_spec = entry.get("trajectory", {})
        if "positions" in traj_spec:
            traj = Trajectory(
                np.asarray(traj_spec["positions"], dtype=np.float64),
                float(traj_spec.get("rate", TRAJECTORY_RATE)),
            )
        elif "sample" in traj_spec:
            ts = traj_spec["sample"]
            traj = sample_trajectory(
                int(ts.get("seed", 0)),
                np.asarray(ts["bounds"], dtype=np.float64),
                float(ts.get("duration", audio.shape[0] / sample_rate)),
                float(ts.get("max_speed", 1.0)),
                float(ts.get("rate", TRAJECTORY_RATE)),
            )
        else:
            raise ValueError(f"source {i}: trajectory needs positions or sample spec")
        sources.append(SceneSource(traj, audio, entry.get("name", f"src{i}")))
    return SceneSpec(
        room_dims=np.asarray(doc["room_dims"], dtype=np.float64),
        sources=sources,
        array_pose=pose,
        geometry=geometry,
        absorption=np.asarray(doc.get("absorption", 0.7)),
        max_image_order=int(doc.get("max_image_order", 2)),
        speed_of_sound=float(doc.get("speed_of_sound", 343.0)),
        sample_rate=sample_rate,
    )


def load_scene_file(path):
    """Load a scene JSON file; relative audio paths resolve next to it."""
    import os

    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return scene_from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))
