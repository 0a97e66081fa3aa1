"""Experiment orchestration: mixture evaluation, spatial binning, tables.

evaluate_system draws mixtures from a segment manifest, runs one of the
competing systems (passthrough, oracle MVDR, oracle MVDR + single-channel
model post-filter, or the multichannel spatial model) and scores each
mixture on the reference channel. Mixture sampling is keyed on
(seed, mixture index), so results are bit-identical regardless of how
many workers evaluate them.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import io as rio
from .beamform import MvdrBeamformer
from .datasets import (
    load_manifest,
    make_mixture,
    manifest_array,
    sample_mixture_spec,
    save_manifest,
    segment_and_label,
)
from .engine import CausalDemucs, load_weights
from .errors import DataError
from .metrics import EvalRecord, mel_l2, si_sdr
from .sim import (
    INTERFERENCE,
    TARGET,
    ArrayPose,
    RegionSplit,
    SceneSource,
    SceneSpec,
    binaural_rig,
    render_moving_source,
    sample_trajectory,
    synthetic_speech,
)

__all__ = [
    "ExperimentConfig",
    "evaluate_system",
    "spatial_analysis",
    "aggregate_records",
    "format_results_table",
    "build_synthetic_manifest",
    "MIC_PRESETS",
]

METHODS = ("passthrough", "mvdr_oracle", "mvdr_oracle_plus_1ch_model", "spatial_model")
MIC_PRESETS = {2: [0, 1], 4: [0, 1, 4, 5], 8: list(range(8))}


@dataclass
class ExperimentConfig:
    """One evaluation run: a manifest, a method, and a mic subset."""

    manifest: str
    method: str = "passthrough"
    mic_subset: list = None  # None = all channels; else sorted, starting at 0
    weights_path: str = ""
    weights_path_1ch: str = ""
    n_mixtures: int = 50
    sources_per_region: tuple = (1, 1)
    seed: int = 0
    block_adaptive_mvdr: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; one of {METHODS}")
        if self.mic_subset is not None:
            subset = list(self.mic_subset)
            if len(subset) < 1:
                raise ValueError("mic_subset must not be empty")
            if subset[0] != 0:
                raise ValueError("mic_subset must keep channel 0 as the reference")
            if sorted(subset) != subset or len(set(subset)) != len(subset):
                raise ValueError("mic_subset must be strictly increasing (no reorder)")
        n_t, n_i = self.sources_per_region
        if n_t < 1 or n_i < 1:
            raise ValueError("sources_per_region requires >= 1 per region")
        if self.n_mixtures < 1:
            raise ValueError("n_mixtures must be >= 1")


def _load_models(cfg):
    """Resolve weight files up front so missing weights fail before any
    audio is processed."""
    spatial = post = None
    if cfg.method == "spatial_model":
        if not cfg.weights_path:
            raise ValueError("spatial_model requires weights_path")
        spatial = CausalDemucs(load_weights(cfg.weights_path))
    if cfg.method == "mvdr_oracle_plus_1ch_model":
        if not cfg.weights_path_1ch:
            raise ValueError("mvdr_oracle_plus_1ch_model requires weights_path_1ch")
        post = CausalDemucs(load_weights(cfg.weights_path_1ch))
        if post.config.channels != 1:
            raise ValueError(
                f"post-filter weights must be single-channel, got "
                f"{post.config.channels}"
            )
    return spatial, post


def _spatial_descriptors(spec, pose):
    """Time-averaged angle (deg, at the array) and Euclidean distance (m)
    between target and interference sources, averaged over pairs."""
    if pose is None:
        return float("nan"), float("nan")
    angles, dists = [], []
    for tseg in spec.target_segments:
        a = pose.to_local(tseg.trajectory.positions)
        for iseg in spec.interference_segments:
            b = pose.to_local(iseg.trajectory.positions)
            n = min(a.shape[0], b.shape[0])
            aa, bb = a[:n], b[:n]
            dot = np.sum(aa * bb, axis=1)
            na = np.linalg.norm(aa, axis=1)
            nb = np.linalg.norm(bb, axis=1)
            cosang = np.clip(dot / np.maximum(na * nb, 1e-12), -1.0, 1.0)
            angles.append(np.degrees(np.arccos(cosang)).mean())
            dists.append(np.linalg.norm(aa - bb, axis=1).mean())
    return float(np.mean(angles)), float(np.mean(dists))


def _run_method(cfg, mix, ref, spatial_model, post_model):
    """Return the single-channel estimate for one mixture."""
    if cfg.method == "passthrough":
        return mix[0]
    if cfg.method == "spatial_model":
        if spatial_model.config.channels != mix.shape[0]:
            raise ValueError(
                f"spatial model expects {spatial_model.config.channels} channels, "
                f"mixture has {mix.shape[0]}"
            )
        return spatial_model.forward(mix.astype(np.float32))[0]
    bf = MvdrBeamformer(block_adaptive=cfg.block_adaptive_mvdr)
    est = bf.fit(mix, ref).transform(mix)[0]
    if cfg.method == "mvdr_oracle_plus_1ch_model":
        est = post_model.forward(est[None, :].astype(np.float32))[0]
    return est


def _evaluate_one(cfg, index, pools, pose, base_dir, spatial_model, post_model):
    targets, inters = pools
    rng = np.random.default_rng([cfg.seed, index])
    n_t, n_i = cfg.sources_per_region
    spec = sample_mixture_spec(rng, targets, inters, n_t, n_i)
    mix, ref = make_mixture(spec, base_dir)
    if cfg.mic_subset is not None:
        if max(cfg.mic_subset) >= mix.shape[0]:
            raise ValueError(
                f"mic_subset {cfg.mic_subset} out of range for {mix.shape[0]} channels"
            )
        mix = mix[cfg.mic_subset]
        ref = ref[cfg.mic_subset]
    est = _run_method(cfg, mix, ref, spatial_model, post_model)
    est = np.asarray(est, dtype=np.float64)
    si_in = si_sdr(mix[0], ref[0])
    si_out = si_sdr(est, ref[0])
    ang, cart = _spatial_descriptors(spec, pose)
    return EvalRecord(
        segment_id="+".join(
            s.segment_id for s in spec.target_segments + spec.interference_segments
        ),
        si_sdr_in=si_in,
        si_sdr_out=si_out,
        si_sdri=si_out - si_in,
        mel_l2=mel_l2(est, ref[0]),
        mean_angular_distance=ang,
        mean_cartesian_distance=cart,
        n_targets=len(spec.target_segments),
        n_interferers=len(spec.interference_segments),
        mic_count=mix.shape[0],
    )


_WORKER_STATE = {}


def _worker_eval(args):
    key, cfg, index = args
    if key not in _WORKER_STATE:
        _WORKER_STATE[key] = _prepare(cfg)
    pools, pose, base_dir, spatial_model, post_model = _WORKER_STATE[key]
    rec = _evaluate_one(cfg, index, pools, pose, base_dir, spatial_model, post_model)
    return index, rec.to_dict()


def _prepare(cfg):
    records, header = load_manifest(cfg.manifest)
    base_dir = os.path.dirname(os.path.abspath(cfg.manifest))
    pose, _ = manifest_array(header)
    targets = [r for r in records if r.region == TARGET]
    inters = [r for r in records if r.region == INTERFERENCE]
    if not targets or not inters:
        raise DataError(
            f"manifest needs both regions: {len(targets)} target / "
            f"{len(inters)} interference segments"
        )
    spatial_model, post_model = _load_models(cfg)
    return (targets, inters), pose, base_dir, spatial_model, post_model


def evaluate_system(cfg, jobs=1):
    """Run one experiment; returns (records, aggregate dict).

    Deterministic given cfg.seed and identical weight files, independent
    of the worker count.
    """
    pools, pose, base_dir, spatial_model, post_model = _prepare(cfg)
    if jobs <= 1:
        records = [
            _evaluate_one(cfg, m, pools, pose, base_dir, spatial_model, post_model)
            for m in range(cfg.n_mixtures)
        ]
    else:
        key = (cfg.manifest, cfg.method, cfg.seed, cfg.weights_path)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    _worker_eval,
                    [(key, cfg, m) for m in range(cfg.n_mixtures)],
                    chunksize=4,
                )
            )
        results.sort(key=lambda kv: kv[0])
        records = [EvalRecord.from_dict(d) for _, d in results]
    return records, aggregate_records(records)


def aggregate_records(records):
    """Arithmetic mean of every numeric EvalRecord field."""
    if not records:
        raise ValueError("no records to aggregate")
    keys = [
        "si_sdr_in", "si_sdr_out", "si_sdri", "mel_l2",
        "mean_angular_distance", "mean_cartesian_distance",
    ]
    agg = {k: float(np.mean([getattr(r, k) for r in records])) for k in keys}
    agg["n_records"] = len(records)
    agg["mic_count"] = records[0].mic_count
    agg["n_targets"] = records[0].n_targets
    agg["n_interferers"] = records[0].n_interferers
    return agg


def spatial_analysis(records, angle_bin_deg=20.0, distance_bin_m=0.5,
                     value="si_sdr_out"):
    """Mean metric per (angle bin x distance bin) cell.

    Returns dict with `grid` (NaN where a cell holds no records),
    `counts`, and the bin edges.
    """
    if angle_bin_deg <= 0 or distance_bin_m <= 0:
        raise ValueError("bin sizes must be positive")
    if not records:
        raise ValueError("no records to analyze")
    ang = np.array([r.mean_angular_distance for r in records])
    dist = np.array([r.mean_cartesian_distance for r in records])
    vals = np.array([getattr(r, value) for r in records])
    ai = np.floor(ang / angle_bin_deg).astype(int)
    di = np.floor(dist / distance_bin_m).astype(int)
    na, nd = ai.max() + 1, di.max() + 1
    grid = np.full((na, nd), np.nan)
    counts = np.zeros((na, nd), dtype=int)
    sums = np.zeros((na, nd))
    for a, d, v in zip(ai, di, vals):
        sums[a, d] += v
        counts[a, d] += 1
    nz = counts > 0
    grid[nz] = sums[nz] / counts[nz]
    return {
        "grid": grid,
        "counts": counts,
        "angle_edges": np.arange(na + 1) * angle_bin_deg,
        "distance_edges": np.arange(nd + 1) * distance_bin_m,
        "value": value,
    }


def format_results_table(rows):
    """Aligned text table, one row per (mic_count, method): SI-SDR out,
    out-in, and mel distance (1-decimal dB, 3-decimal mel)."""
    header = f"{'mics':>4}  {'method':<28} {'out':>7} {'out-in':>7} {'mel_l2':>7}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row['mic_count']:>4}  {row['method']:<28} "
            f"{row['si_sdr_out']:>7.1f} {row['si_sdri']:>7.1f} "
            f"{row['mel_l2']:>7.3f}"
        )
    return "\n".join(lines)


def write_records(records, path):
    rio.write_jsonl(path, [r.to_dict() for r in records])


def read_records(path):
    return [EvalRecord.from_dict(d) for d in rio.read_jsonl(path)]


# ---------------------------------------------------------------------------
# synthetic population builder (single-source recordings; mixtures pair
# segments across recordings, mirroring how separately captured target and
# interference takes are combined)

DEFAULT_ROOM = (6.0, 5.0, 3.0)


def region_bounds(split, room=DEFAULT_ROOM, margin=0.5):
    """Sampling boxes for each region, for an array at room center."""
    cx, cy, cz = room[0] / 2, room[1] / 2, 1.5
    if split.kind == "left_right":
        target = [[margin, cy + 0.4, 1.0], [room[0] - margin, room[1] - margin, 2.0]]
        interference = [[margin, margin, 1.0], [room[0] - margin, cy - 0.4, 2.0]]
    else:
        target = [[cx + 1.0, margin, 1.0], [room[0] - margin, room[1] - margin, 2.0]]
        near = 0.95 * split.boundary / np.sqrt(3.0)
        interference = [
            [cx - near, cy - near, cz - near],
            [cx + near, cy + near, cz + near],
        ]
    return {TARGET: np.asarray(target), INTERFERENCE: np.asarray(interference)}


def synth_recording_plan(split, n_per_region, seed, duration=3.0, max_speed=0.5,
                         room=DEFAULT_ROOM, absorption=0.7, max_image_order=2):
    """Deterministic plan of single-source recordings for both regions."""
    bounds = region_bounds(split, room)
    plan = []
    idx = 0
    for region in (TARGET, INTERFERENCE):
        for k in range(n_per_region):
            plan.append(
                {
                    "region": region,
                    "bounds": bounds[region],
                    "traj_seed": seed * 100003 + idx * 17 + 5,
                    "audio_seed": seed * 99991 + idx * 13 + 3,
                    "duration": duration,
                    "max_speed": max_speed,
                    "room": room,
                    "absorption": absorption,
                    "max_image_order": max_image_order,
                    "name": f"{region[:3]}{k:03d}",
                }
            )
            idx += 1
    return plan


def render_plan_entry(entry, geometry=None, pose=None):
    """Render one planned single-source recording; returns
    (audio, trajectory, pose, geometry, name)."""
    room = entry.get("room", DEFAULT_ROOM)
    geometry = geometry or binaural_rig()
    pose = pose or ArrayPose(np.array([room[0] / 2, room[1] / 2, 1.5]))
    traj = sample_trajectory(
        entry["traj_seed"], entry["bounds"], entry["duration"], entry["max_speed"]
    )
    audio = synthetic_speech(entry["audio_seed"], entry["duration"])
    scene = SceneSpec(
        room_dims=np.asarray(room),
        sources=[SceneSource(traj, audio, entry["name"])],
        array_pose=pose,
        geometry=geometry,
        absorption=entry.get("absorption", 0.7),
        max_image_order=entry.get("max_image_order", 2),
    )
    return render_moving_source(scene, 0), traj, pose, geometry, entry["name"]


def _render_plan(plan, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(render_plan_entry, plan, chunksize=1))
    return [render_plan_entry(e) for e in plan]


def build_synthetic_manifest(out_dir, split, n_per_region, seed, duration=3.0,
                             max_speed=0.5, room=DEFAULT_ROOM, absorption=0.7,
                             max_image_order=2, jobs=1):
    """Render a synthetic population and write a labeled segment manifest.

    Returns the manifest path. Every recording holds one source confined
    to its region, so each 3 s recording yields exactly one clean segment.
    """
    rio.ensure_dir(out_dir)
    plan = synth_recording_plan(split, n_per_region, seed, duration, max_speed, room,
                                absorption, max_image_order)
    rendered = _render_plan(plan, jobs)
    all_records = []
    pose = geometry = None
    for (audio, traj, pose, geometry, name), entry in zip(rendered, plan):
        recs = segment_and_label(
            audio, traj, pose, geometry, split, source_id=name
        )
        for r in recs:
            if r.region != entry["region"]:
                raise AssertionError(
                    f"recording {name} classified {r.region}, planned {entry['region']}"
                )
        all_records.extend(recs)
    manifest = os.path.join(out_dir, "manifest.jsonl")
    save_manifest(all_records, manifest, pose, geometry)
    return manifest


def build_synthetic_recordings(out_dir, split, n_per_region, seed, duration=3.0,
                               max_speed=0.5, room=DEFAULT_ROOM, absorption=0.7,
                               max_image_order=2, jobs=1, sample_rate=48000):
    """Render the population as raw recordings plus a recordings.jsonl
    index (audio path, trajectory, array placement); the `segment` CLI
    subcommand consumes this layout. Returns the index path."""
    rio.ensure_dir(out_dir)
    plan = synth_recording_plan(split, n_per_region, seed, duration, max_speed, room,
                                absorption, max_image_order)
    rendered = _render_plan(plan, jobs)
    lines = []
    pose = geometry = None
    for (audio, traj, pose, geometry, name), entry in zip(rendered, plan):
        wav = f"rec_{name}.wav"
        rio.write_wav(os.path.join(out_dir, wav), audio, sample_rate)
        lines.append(
            {
                "type": "recording",
                "audio": wav,
                "name": name,
                "trajectory": {
                    "rate": traj.rate,
                    "positions": np.round(traj.positions, 6).tolist(),
                },
            }
        )
    header = {
        "type": "header",
        "schema_version": 1,
        "sample_rate": sample_rate,
        "array": {
            "position": pose.position.tolist(),
            "rotation": pose.rotation.tolist(),
            "geometry": {
                "mic_positions": geometry.mic_positions.tolist(),
                "forward_axis": geometry.forward_axis.tolist(),
                "lateral_axis": geometry.lateral_axis.tolist(),
            },
        },
    }
    index = os.path.join(out_dir, "recordings.jsonl")
    rio.write_jsonl(index, [header] + lines)
    return index
