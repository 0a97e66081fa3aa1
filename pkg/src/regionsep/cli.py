"""Command-line interface.

Subcommands: simulate, segment, mix, beamform, enhance, eval, analyze.
Exit codes: 0 success, 2 configuration error, 3 data error. Every
subcommand writes a run.json provenance file (arguments, package
version, seed) into its output directory.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from . import io as rio
from .beamform import MvdrBeamformer
from .datasets import load_manifest, make_mixture, manifest_array, sample_mixture_spec
from .engine import DemucsSeparator
from .engine import WeightFormatError
from .errors import ConfigError, DataError
from .evaluation import (
    MIC_PRESETS,
    ExperimentConfig,
    build_synthetic_recordings,
    evaluate_system,
    format_results_table,
    read_records,
    spatial_analysis,
    write_records,
)
from .sim import (
    RegionSplit,
    Trajectory,
    load_scene_file,
    render_scene,
    classify_region,
)
from .datasets import save_manifest, segment_and_label

__all__ = ["main"]


def _write_run_info(out_dir, args):
    rio.ensure_dir(out_dir)
    info = {
        "command": args.command,
        "config": {
            k: v for k, v in vars(args).items()
            if k != "func" and not k.startswith("_")
        },
        "version": __version__,
        "seed": getattr(args, "seed", None),
    }
    with open(os.path.join(out_dir, "run.json"), "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2, sort_keys=True, default=str)


def _require_file(path, what):
    if not os.path.exists(path):
        raise DataError(f"{what} not found: {path}")
    return path


def _split_from_args(args):
    return RegionSplit(args.split, args.boundary)


def cmd_simulate(args):
    out = args.out
    rio.ensure_dir(out)
    if args.scene:
        scene = load_scene_file(_require_file(args.scene, "scene file"))
        mix, stems = render_scene(scene, return_stems=True)
        rio.write_wav(os.path.join(out, "mix.wav"), mix, scene.sample_rate)
        meta = {"sample_rate": scene.sample_rate, "sources": []}
        for i, stem in enumerate(stems):
            name = f"stem_{i:03d}.wav"
            rio.write_wav(os.path.join(out, name), stem, scene.sample_rate)
            meta["sources"].append({"audio": name})
        with open(os.path.join(out, "render.json"), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)
        print(f"wrote {out}/mix.wav and {len(stems)} stems")
    else:
        if args.random is None:
            raise ConfigError("simulate needs --scene FILE or --random N")
        split = _split_from_args(args)
        index = build_synthetic_recordings(
            out, split, args.random, seed=args.seed,
            duration=args.duration, max_speed=args.max_speed,
            absorption=args.absorption, max_image_order=args.image_order,
            jobs=args.jobs,
        )
        print(f"wrote {index}")
    _write_run_info(out, args)
    return 0


def cmd_segment(args):
    from .sim import ArrayGeometry, ArrayPose

    render_dir = args.render
    index_path = _require_file(os.path.join(render_dir, "recordings.jsonl"),
                               "recordings index")
    entries = rio.read_jsonl(index_path)
    header = entries[0]
    if header.get("type") != "header":
        raise DataError(f"{index_path} has no header line")
    pose = ArrayPose(
        np.asarray(header["array"]["position"]),
        np.asarray(header["array"].get("rotation", np.eye(3).tolist())),
    )
    geometry = ArrayGeometry(
        np.asarray(header["array"]["geometry"]["mic_positions"]),
        np.asarray(header["array"]["geometry"].get("forward_axis", (1, 0, 0))),
        np.asarray(header["array"]["geometry"].get("lateral_axis", (0, 1, 0))),
    )
    split = _split_from_args(args)
    records = []
    for entry in entries[1:]:
        audio, sr = rio.read_wav(os.path.join(render_dir, entry["audio"]))
        traj = Trajectory(
            np.asarray(entry["trajectory"]["positions"]),
            entry["trajectory"].get("rate", 240.0),
        )
        records.extend(
            segment_and_label(
                audio, traj, pose, geometry, split,
                sample_rate=sr, source_id=entry.get("name", "src"),
            )
        )
    if not records:
        raise DataError("no unambiguous segments found")
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    save_manifest(records, args.out, pose, geometry)
    _write_run_info(out_dir, args)
    print(f"wrote {args.out} ({len(records)} segments)")
    return 0


def cmd_mix(args):
    manifest = _require_file(args.manifest, "manifest")
    records, header = load_manifest(manifest)
    base = os.path.dirname(os.path.abspath(manifest))
    targets = [r for r in records if r.region == "target"]
    inters = [r for r in records if r.region == "interference"]
    if not targets or not inters:
        raise DataError("manifest needs segments in both regions")
    rio.ensure_dir(args.out)
    sr = header["sample_rate"]
    index = []
    for m in range(args.n):
        rng = np.random.default_rng([args.seed, m])
        spec = sample_mixture_spec(rng, targets, inters, args.targets, args.interferers)
        mixture, reference = make_mixture(spec, base)
        mix_name, ref_name = f"mix_{m:04d}.wav", f"ref_{m:04d}.wav"
        rio.write_wav(os.path.join(args.out, mix_name), mixture, sr)
        rio.write_wav(os.path.join(args.out, ref_name), reference, sr)
        index.append(
            {
                "mixture": mix_name,
                "reference": ref_name,
                "segments": [
                    s.segment_id
                    for s in spec.target_segments + spec.interference_segments
                ],
            }
        )
    rio.write_jsonl(os.path.join(args.out, "mixtures.jsonl"), index)
    _write_run_info(args.out, args)
    print(f"wrote {args.n} mixtures to {args.out}")
    return 0


def cmd_beamform(args):
    mix, sr = rio.read_wav(_require_file(args.mix, "mixture"))
    target, sr_t = rio.read_wav(_require_file(args.target, "target stem"))
    if sr_t != sr:
        raise DataError(f"sample-rate mismatch: mixture {sr}, target {sr_t}")
    interference = None
    if args.interference:
        interference, sr_i = rio.read_wav(_require_file(args.interference,
                                                        "interference stem"))
        if sr_i != sr:
            raise DataError(f"sample-rate mismatch: mixture {sr}, interference {sr_i}")
    bf = MvdrBeamformer(block_adaptive=args.block_adaptive, sample_rate=sr)
    est = bf.fit(mix, target, interference=interference).transform(mix)
    rio.write_wav(args.out, est, sr)
    _write_run_info(os.path.dirname(os.path.abspath(args.out)) or ".", args)
    print(f"wrote {args.out}")
    return 0


def cmd_enhance(args):
    mix, sr = rio.read_wav(_require_file(args.input_path, "input mixture"))
    sep = DemucsSeparator(weights=_require_file(args.weights, "weight file")).fit()
    if sep.config_.channels != mix.shape[0]:
        raise ConfigError(
            f"weights expect {sep.config_.channels} channels, input has {mix.shape[0]}"
        )
    if args.stream:
        stream = sep.stream()
        parts = []
        for start in range(0, mix.shape[1], args.chunk):
            parts.append(stream.push(mix[:, start:start + args.chunk]))
        parts.append(stream.flush())
        out = np.concatenate(parts, axis=1)
    else:
        out = sep.transform(mix)
    rio.write_wav(args.out, out, sr)
    _write_run_info(os.path.dirname(os.path.abspath(args.out)) or ".", args)
    print(f"wrote {args.out}")
    return 0


def cmd_eval(args):
    mic_subset = None
    if args.mics:
        try:
            mic_subset = (
                MIC_PRESETS[int(args.mics)]
                if args.mics.isdigit()
                else [int(v) for v in args.mics.split(",")]
            )
        except KeyError:
            raise ConfigError(
                f"no mic preset {args.mics!r}; presets: {sorted(MIC_PRESETS)} "
                "or a comma-separated index list"
            )
    cfg = ExperimentConfig(
        manifest=_require_file(args.manifest, "manifest"),
        method=args.method,
        mic_subset=mic_subset,
        weights_path=args.weights or "",
        weights_path_1ch=args.weights_1ch or "",
        n_mixtures=args.n,
        sources_per_region=(args.targets, args.interferers),
        seed=args.seed,
        block_adaptive_mvdr=args.block_adaptive,
    )
    records, agg = evaluate_system(cfg, jobs=args.jobs)
    rio.ensure_dir(args.out)
    write_records(records, os.path.join(args.out, "records.jsonl"))
    row = dict(agg, method=args.method)
    with open(os.path.join(args.out, "aggregate.csv"), "w", encoding="utf-8") as fh:
        keys = sorted(row)
        fh.write(",".join(keys) + "\n")
        fh.write(",".join(str(row[k]) for k in keys) + "\n")
    table = format_results_table([row])
    with open(os.path.join(args.out, "table.txt"), "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    _write_run_info(args.out, args)
    print(table)
    return 0


def cmd_analyze(args):
    records = read_records(_require_file(args.records, "records file"))
    result = spatial_analysis(records, args.angle_bin, args.distance_bin)
    rio.ensure_dir(args.out)
    grid = result["grid"]
    path = os.path.join(args.out, "spatial_grid.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("angle_lo_deg,angle_hi_deg,dist_lo_m,dist_hi_m,mean,count\n")
        for a in range(grid.shape[0]):
            for d in range(grid.shape[1]):
                fh.write(
                    f"{result['angle_edges'][a]},{result['angle_edges'][a + 1]},"
                    f"{result['distance_edges'][d]},{result['distance_edges'][d + 1]},"
                    f"{'' if np.isnan(grid[a, d]) else grid[a, d]},"
                    f"{result['counts'][a, d]}\n"
                )
    _write_run_info(args.out, args)
    print(f"wrote {path}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="regionsep",
        description="Separate moving sound sources by broad spatial region.",
    )
    p.add_argument("--config", help="JSON file with defaults for the subcommand")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--jobs", type=int, default=1)
        if out_required:
            sp.add_argument("--out", required=True)

    sp = sub.add_parser("simulate", help="render scenes (file or random population)")
    sp.add_argument("--scene", help="scene JSON file to render")
    sp.add_argument("--random", type=int,
                    help="render N single-source recordings per region")
    sp.add_argument("--split", choices=["left_right", "near_far"],
                    default="left_right")
    sp.add_argument("--boundary", type=float, default=0.7)
    sp.add_argument("--duration", type=float, default=3.0)
    sp.add_argument("--max-speed", type=float, default=0.5)
    sp.add_argument("--absorption", type=float, default=0.7)
    sp.add_argument("--image-order", type=int, default=2)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("segment", help="cut renders into labeled 3 s segments")
    sp.add_argument("--render", required=True, help="directory from simulate")
    sp.add_argument("--split", choices=["left_right", "near_far"], required=True)
    sp.add_argument("--boundary", type=float, default=0.7)
    common(sp)
    sp.set_defaults(func=cmd_segment)

    sp = sub.add_parser("mix", help="build mixtures from a segment manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--n", type=int, default=10)
    sp.add_argument("--targets", type=int, default=1)
    sp.add_argument("--interferers", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_mix)

    sp = sub.add_parser("beamform", help="oracle MVDR on a mixture with stems")
    sp.add_argument("--mix", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--interference", help="defaults to mixture - target")
    sp.add_argument("--block-adaptive", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_beamform)

    sp = sub.add_parser("enhance", help="run the waveform separator on a WAV")
    sp.add_argument("--weights", required=True)
    sp.add_argument("--in", dest="input_path", required=True)
    sp.add_argument("--stream", action="store_true")
    sp.add_argument("--chunk", type=int, default=1024)
    common(sp)
    sp.set_defaults(func=cmd_enhance)

    sp = sub.add_parser("eval", help="evaluate a method over sampled mixtures")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--method", required=True,
                    choices=["passthrough", "mvdr_oracle",
                             "mvdr_oracle_plus_1ch_model", "spatial_model"])
    sp.add_argument("--mics", help="2/4/8 preset or comma-separated indices")
    sp.add_argument("--weights", help="spatial model weight file")
    sp.add_argument("--weights-1ch", help="single-channel post-filter weights")
    sp.add_argument("--n", type=int, default=50)
    sp.add_argument("--targets", type=int, default=1)
    sp.add_argument("--interferers", type=int, default=1)
    sp.add_argument("--block-adaptive", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("analyze", help="bin records by angle/distance")
    sp.add_argument("--records", required=True)
    sp.add_argument("--angle-bin", type=float, default=20.0)
    sp.add_argument("--distance-bin", dest="distance_bin", type=float, default=0.5)
    common(sp)
    sp.set_defaults(func=cmd_analyze)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                overrides = json.load(fh)
        except OSError as e:
            print(f"config error: {e}", file=sys.stderr)
            return 2
        except json.JSONDecodeError as e:
            print(f"config error: bad JSON in {args.config}: {e}", file=sys.stderr)
            return 2
        for k, v in overrides.items():
            if not hasattr(args, k):
                print(f"config error: unknown option {k!r}", file=sys.stderr)
                return 2
            setattr(args, k, v)
    try:
        return args.func(args)
    except (DataError, WeightFormatError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
