import numpy as np
import pytest

from regionsep.engine import (
    CausalDemucs,
    DemucsConfig,
    DemucsSeparator,
    DemucsStreamer,
    algorithmic_latency,
    init_weights,
)

TINY = DemucsConfig(channels=2, layers=2, hidden=4, kernel=8, stride=4)


def _model(cfg=TINY, seed=0):
    return CausalDemucs(init_weights(cfg, seed=seed))


def _stream_all(model, x, chunk, normalize):
    stream = DemucsStreamer(model, normalize=normalize)
    outs = []
    for start in range(0, x.shape[1], chunk):
        outs.append(stream.push(x[:, start:start + chunk]))
    outs.append(stream.flush())
    assert stream.samples_emitted == stream.samples_consumed == x.shape[1]
    return np.concatenate(outs, axis=1)


@pytest.mark.parametrize("chunk", [64, 1024, 4096, 20000])
@pytest.mark.parametrize("norm", ["off", "running"])
def test_stream_matches_offline(chunk, norm):
    model = _model()
    rng = np.random.default_rng(chunk)
    x = rng.standard_normal((2, 20000)).astype(np.float32)
    offline = model.forward(x, normalize=norm)
    streamed = _stream_all(model, x, chunk, norm)
    assert streamed.shape == offline.shape
    err = np.max(np.abs(streamed - offline)) / max(np.max(np.abs(offline)), 1e-12)
    assert err <= 1e-5


def test_stream_odd_lengths():
    model = _model()
    rng = np.random.default_rng(5)
    for t in [1, 15, 16, 17, 1023, 4097]:
        x = rng.standard_normal((2, t)).astype(np.float32)
        offline = model.forward(x, normalize="running")
        streamed = _stream_all(model, x, 7, "running")
        assert streamed.shape == (2, t)
        err = np.max(np.abs(streamed - offline)) if t else 0.0
        assert err <= 1e-5 * max(np.max(np.abs(offline)), 1.0)


def test_stream_emission_latency():
    model = _model()
    stream = DemucsStreamer(model, normalize="off")
    lat = algorithmic_latency(TINY)
    out = stream.push(np.ones((2, lat - 1), dtype=np.float32))
    assert out.shape[1] == 0
    out = stream.push(np.ones((2, 1), dtype=np.float32))
    assert out.shape[1] == lat


def test_push_after_flush_rejected():
    stream = DemucsStreamer(_model(), normalize="off")
    stream.push(np.zeros((2, 10), dtype=np.float32))
    stream.flush()
    with pytest.raises(RuntimeError, match="flush"):
        stream.push(np.zeros((2, 1), dtype=np.float32))
    with pytest.raises(RuntimeError, match="flushed"):
        stream.flush()


def test_stream_state_isolation():
    model = _model()
    rng = np.random.default_rng(6)
    x = rng.standard_normal((2, 3000)).astype(np.float32)
    s1 = DemucsStreamer(model, normalize="running")
    s2 = DemucsStreamer(model, normalize="running")
    outs1, outs2 = [], []
    for start in range(0, 3000, 250):
        chunk = x[:, start:start + 250]
        outs1.append(s1.push(chunk))
        outs2.append(s2.push(chunk))
    outs1.append(s1.flush())
    outs2.append(s2.flush())
    a = np.concatenate(outs1, axis=1)
    b = np.concatenate(outs2, axis=1)
    assert np.array_equal(a, b)


def test_stream_rejects_global_normalization():
    with pytest.raises(ValueError, match="normalize"):
        DemucsStreamer(_model(), normalize="global")


def test_stream_channel_check():
    stream = DemucsStreamer(_model(), normalize="off")
    with pytest.raises(ValueError, match="chunk"):
        stream.push(np.zeros((3, 10)))


def test_separator_estimator(tmp_path):
    from regionsep.engine import save_weights
    from sklearn.base import clone

    store = init_weights(TINY, seed=1)
    path = str(tmp_path / "m.sdwx")
    save_weights(store, path)
    sep = DemucsSeparator(weights=path)
    assert clone(sep).get_params()["weights"] == path
    x = np.random.default_rng(0).standard_normal((2, 5000)).astype(np.float32)
    y = sep.fit().transform(x)
    assert y.shape == x.shape
    # streaming through the estimator matches its offline transform
    sep_run = DemucsSeparator(weights=store, normalize="running").fit()
    stream = sep_run.stream()
    parts = [stream.push(x[:, :2500]), stream.push(x[:, 2500:]), stream.flush()]
    streamed = np.concatenate(parts, axis=1)
    offline = sep_run.transform(x)
    assert np.max(np.abs(streamed - offline)) <= 1e-5 * np.max(np.abs(offline))
    with pytest.raises(ValueError, match="weights"):
        DemucsSeparator().fit()
