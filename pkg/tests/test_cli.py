import json
import os

import numpy as np
import pytest

from regionsep import io as rio
from regionsep.cli import main
from regionsep.engine import DemucsConfig, init_weights, save_weights
from regionsep.metrics import si_sdr
from regionsep.sim import synthetic_speech


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """simulate -> segment -> mix, shared across CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    render = str(root / "render")
    assert main(["simulate", "--random", "3", "--split", "left_right",
                 "--seed", "5", "--out", render]) == 0
    manifest = str(root / "manifest.jsonl")
    assert main(["segment", "--render", render, "--split", "left_right",
                 "--out", manifest]) == 0
    mixdir = str(root / "mixes")
    assert main(["mix", "--manifest", manifest, "--n", "2", "--seed", "1",
                 "--out", mixdir]) == 0
    return {"root": root, "render": render, "manifest": manifest, "mix": mixdir}


def test_simulate_writes_recordings(pipeline):
    render = pipeline["render"]
    index = rio.read_jsonl(os.path.join(render, "recordings.jsonl"))
    assert index[0]["type"] == "header"
    assert len(index) == 1 + 6  # 3 per region
    assert os.path.exists(os.path.join(render, "run.json"))
    audio, sr = rio.read_wav(os.path.join(render, index[1]["audio"]))
    assert sr == 48000
    assert audio.shape[0] == 8


def test_segment_manifest(pipeline):
    lines = rio.read_jsonl(pipeline["manifest"])
    assert lines[0]["type"] == "header"
    segs = [l for l in lines if l.get("type") == "segment"]
    assert len(segs) == 6
    regions = {s["region"] for s in segs}
    assert regions == {"target", "interference"}


def test_mix_outputs(pipeline):
    mixdir = pipeline["mix"]
    index = rio.read_jsonl(os.path.join(mixdir, "mixtures.jsonl"))
    assert len(index) == 2
    mix, _ = rio.read_wav(os.path.join(mixdir, index[0]["mixture"]))
    ref, _ = rio.read_wav(os.path.join(mixdir, index[0]["reference"]))
    assert mix.shape == ref.shape == (8, 144000)


def test_beamform_cli(pipeline, tmp_path):
    mixdir = pipeline["mix"]
    index = rio.read_jsonl(os.path.join(mixdir, "mixtures.jsonl"))
    mix_path = os.path.join(mixdir, index[0]["mixture"])
    ref_path = os.path.join(mixdir, index[0]["reference"])
    out = str(tmp_path / "bf.wav")
    assert main(["beamform", "--mix", mix_path, "--target", ref_path,
                 "--out", out]) == 0
    est, sr = rio.read_wav(out)
    mix, _ = rio.read_wav(mix_path)
    ref, _ = rio.read_wav(ref_path)
    assert est.shape == (1, mix.shape[1])
    assert si_sdr(est[0], ref[0]) > si_sdr(mix[0], ref[0])


def test_enhance_cli(tmp_path):
    wpath = str(tmp_path / "w.sdwx")
    save_weights(init_weights(DemucsConfig(channels=2, layers=2, hidden=4), 0), wpath)
    wav_in = str(tmp_path / "in.wav")
    x = np.stack([synthetic_speech(0, 1.0), synthetic_speech(1, 1.0)])
    rio.write_wav(wav_in, x, 48000)
    out = str(tmp_path / "est.wav")
    assert main(["enhance", "--weights", wpath, "--in", wav_in, "--out", out]) == 0
    est, _ = rio.read_wav(out)
    assert est.shape == (2, 48000)
    out2 = str(tmp_path / "est_stream.wav")
    assert main(["enhance", "--weights", wpath, "--in", wav_in, "--out", out2,
                 "--stream", "--chunk", "4096"]) == 0
    est2, _ = rio.read_wav(out2)
    assert est2.shape == (2, 48000)


def test_eval_and_analyze_cli(pipeline, tmp_path):
    evaldir = str(tmp_path / "eval")
    assert main(["eval", "--manifest", pipeline["manifest"], "--method",
                 "passthrough", "--n", "3", "--seed", "2", "--out", evaldir]) == 0
    assert os.path.exists(os.path.join(evaldir, "records.jsonl"))
    assert os.path.exists(os.path.join(evaldir, "aggregate.csv"))
    assert os.path.exists(os.path.join(evaldir, "table.txt"))
    run = json.load(open(os.path.join(evaldir, "run.json")))
    assert run["command"] == "eval"
    assert run["seed"] == 2
    assert "version" in run
    outdir = str(tmp_path / "analysis")
    assert main(["analyze", "--records", os.path.join(evaldir, "records.jsonl"),
                 "--out", outdir]) == 0
    assert os.path.exists(os.path.join(outdir, "spatial_grid.csv"))


def test_eval_with_mic_preset(pipeline, tmp_path):
    evaldir = str(tmp_path / "eval2")
    assert main(["eval", "--manifest", pipeline["manifest"], "--method",
                 "mvdr_oracle", "--mics", "2", "--n", "2", "--out", evaldir]) == 0
    recs = rio.read_jsonl(os.path.join(evaldir, "records.jsonl"))
    assert all(r["mic_count"] == 2 for r in recs)


def test_exit_code_config_error(pipeline, tmp_path):
    # spatial_model without weights is a configuration problem
    assert main(["eval", "--manifest", pipeline["manifest"], "--method",
                 "spatial_model", "--n", "1",
                 "--out", str(tmp_path / "x")]) == 2
    assert main(["eval", "--manifest", pipeline["manifest"], "--method",
                 "passthrough", "--mics", "3", "--n", "1",
                 "--out", str(tmp_path / "y")]) == 2


def test_exit_code_data_error(tmp_path):
    assert main(["segment", "--render", str(tmp_path / "nowhere"),
                 "--split", "left_right",
                 "--out", str(tmp_path / "m.jsonl")]) == 3
    assert main(["eval", "--manifest", str(tmp_path / "missing.jsonl"),
                 "--method", "passthrough",
                 "--out", str(tmp_path / "z")]) == 3


def test_config_file_merging(pipeline, tmp_path):
    cfg_path = str(tmp_path / "cfg.json")
    json.dump({"n": 2, "seed": 11}, open(cfg_path, "w"))
    evaldir = str(tmp_path / "eval3")
    assert main(["--config", cfg_path, "eval", "--manifest",
                 pipeline["manifest"], "--method", "passthrough",
                 "--out", evaldir]) == 0
    recs = rio.read_jsonl(os.path.join(evaldir, "records.jsonl"))
    assert len(recs) == 2
    bad = str(tmp_path / "bad.json")
    open(bad, "w").write("{nope")
    assert main(["--config", bad, "eval", "--manifest", pipeline["manifest"],
                 "--method", "passthrough", "--out", evaldir]) == 2
