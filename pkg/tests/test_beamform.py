import numpy as np
import pytest
from sklearn.base import clone

from regionsep.beamform import (
    BeamformerWeights,
    MvdrBeamformer,
    apply_mvdr,
    ideal_ratio_mask,
    mvdr_weights,
    spatial_covariances,
)
from regionsep.dsp import Spectrogram, StftConfig, stft
from regionsep.metrics import si_sdr
from regionsep.sim import (
    ArrayPose,
    SceneSource,
    SceneSpec,
    Trajectory,
    binaural_rig,
    render_scene,
    synthetic_speech,
)

CFG16 = StftConfig(16, 4, 16)


def _spec(bins, cfg=CFG16):
    bins = np.asarray(bins, dtype=np.complex128)
    return Spectrogram(bins, cfg, 48000, orig_len=64)


def test_irm_values():
    f = CFG16.freq_bins
    s = _spec(3.0 * np.ones((1, 2, f)))
    n = _spec(1.0 * np.ones((1, 2, f)))
    mask = ideal_ratio_mask(s, n)
    assert np.allclose(mask.values, 0.75)

    zero = _spec(np.zeros((1, 2, f)))
    assert np.all(ideal_ratio_mask(zero, n).values < 1e-10)

    equal = ideal_ratio_mask(s, s)
    assert np.allclose(equal.values, 0.5, atol=1e-9)


def test_irm_shape_mismatch():
    f = CFG16.freq_bins
    with pytest.raises(ValueError, match="mismatch"):
        ideal_ratio_mask(_spec(np.ones((1, 2, f))), _spec(np.ones((1, 3, f))))


def _random_spec(rng, channels, frames, cfg=CFG16):
    f = cfg.freq_bins
    bins = rng.standard_normal((channels, frames, f)) + 1j * rng.standard_normal(
        (channels, frames, f)
    )
    return _spec(bins, cfg)


def test_covariances_full_mask():
    rng = np.random.default_rng(0)
    spec = _random_spec(rng, 3, 5)
    mask = np.ones((5, CFG16.freq_bins))
    cov = spatial_covariances(spec, mask)
    y = spec.bins
    expected = np.einsum("atf,btf->fab", y, y.conj()) / 5.0
    assert np.allclose(cov.phi_s, expected, atol=1e-12)
    assert np.all(cov.empty_n)
    assert np.all(cov.phi_n == 0)
    cov.validate()


def test_covariances_single_frame_half_mask():
    rng = np.random.default_rng(1)
    spec = _random_spec(rng, 2, 1)
    mask = 0.5 * np.ones((1, CFG16.freq_bins))
    cov = spatial_covariances(spec, mask)
    y = spec.bins[:, 0, :]
    expected = np.einsum("af,bf->fab", y, y.conj())
    assert np.allclose(cov.phi_s, expected, atol=1e-12)
    assert np.allclose(cov.phi_n, expected, atol=1e-12)


def test_covariances_match_bruteforce():
    rng = np.random.default_rng(2)
    spec = _random_spec(rng, 2, 4)
    mask = rng.random((4, CFG16.freq_bins))
    cov = spatial_covariances(spec, mask)
    y = spec.bins
    for f in range(CFG16.freq_bins):
        num_s = np.zeros((2, 2), dtype=complex)
        num_n = np.zeros((2, 2), dtype=complex)
        for t in range(4):
            v = y[:, t, f][:, None]
            num_s += mask[t, f] * (v @ v.conj().T)
            num_n += (1 - mask[t, f]) * (v @ v.conj().T)
        assert np.allclose(cov.phi_s[f], num_s / mask[:, f].sum(), atol=1e-10)
        assert np.allclose(cov.phi_n[f], num_n / (1 - mask[:, f]).sum(), atol=1e-10)
    cov.validate()


def _cov_from(phi_s, phi_n, cfg=CFG16):
    f = phi_s.shape[0]
    from regionsep.beamform import CovarianceSet

    return CovarianceSet(
        phi_s=phi_s, phi_n=phi_n,
        mask_weight_s=np.ones(f), mask_weight_n=np.ones(f),
        empty_s=np.zeros(f, dtype=bool), empty_n=np.zeros(f, dtype=bool),
        config=cfg,
    )


def test_mvdr_closed_form_two_channel():
    f = CFG16.freq_bins
    d = np.array([1.0, 1.0], dtype=complex)
    phi_s = np.tile(np.outer(d, d.conj()), (f, 1, 1))
    phi_n = np.tile(np.eye(2, dtype=complex), (f, 1, 1))
    w = mvdr_weights(_cov_from(phi_s, phi_n), ref_channel=0)
    assert np.allclose(w.weights, 0.5, atol=1e-9)
    assert not w.passthrough.any()


def test_mvdr_single_channel_passthrough():
    f = CFG16.freq_bins
    phi_s = np.ones((f, 1, 1), dtype=complex)
    phi_n = np.ones((f, 1, 1), dtype=complex)
    w = mvdr_weights(_cov_from(phi_s, phi_n))
    assert np.allclose(w.weights, 1.0)


def test_mvdr_zero_statistics_passthrough_flag():
    f = CFG16.freq_bins
    zeros = np.zeros((f, 2, 2), dtype=complex)
    w = mvdr_weights(_cov_from(zeros, zeros), ref_channel=0)
    assert np.all(w.passthrough)
    assert np.allclose(w.weights[:, 0], 1.0)
    assert np.allclose(w.weights[:, 1], 0.0)


def _random_psd(rng, c):
    b = rng.standard_normal((c, c)) + 1j * rng.standard_normal((c, c))
    return b @ b.conj().T + 0.1 * np.eye(c)


@pytest.mark.parametrize("c", [2, 4, 8])
def test_mvdr_distortionless(c):
    # rank-1 target: the filter must pass d undistorted at the reference
    rng = np.random.default_rng(10 + c)
    for _ in range(50):
        d = rng.standard_normal(c) + 1j * rng.standard_normal(c)
        d /= np.linalg.norm(d)
        phi_s = 2.3 * np.outer(d, d.conj())[None]
        phi_n = _random_psd(rng, c)[None]
        w = mvdr_weights(_cov_from(phi_s, phi_n, StftConfig(16, 4, 16)))
        resp = np.abs(w.weights[0].conj() @ d)
        assert abs(resp - np.abs(d[0])) <= 1e-6


def test_mvdr_scale_covariance():
    rng = np.random.default_rng(3)
    c, f = 4, 9
    phi_s = np.stack([_random_psd(rng, c) for _ in range(f)])
    phi_n = np.stack([_random_psd(rng, c) for _ in range(f)])
    w1 = mvdr_weights(_cov_from(phi_s, phi_n))
    alpha = 3.7
    w2 = mvdr_weights(_cov_from(alpha ** 2 * phi_s, alpha ** 2 * phi_n))
    assert np.allclose(w1.weights, w2.weights, atol=1e-9)


def test_apply_mvdr_identity_single_channel():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(8000)
    cfg = StftConfig(1024, 256, 1024)
    w = BeamformerWeights(np.ones((cfg.freq_bins, 1), dtype=complex), 0, cfg)
    out = apply_mvdr(x, w, cfg)
    assert out.shape == (8000,)
    assert np.max(np.abs(out - x)) <= 1e-6 * np.max(np.abs(x))


def test_apply_mvdr_zero_mixture():
    cfg = StftConfig(1024, 256, 1024)
    w = BeamformerWeights(np.ones((cfg.freq_bins, 2), dtype=complex), 0, cfg)
    assert np.all(apply_mvdr(np.zeros((2, 4096)), w, cfg) == 0)


def test_apply_mvdr_config_mismatch():
    cfg = StftConfig(1024, 256, 1024)
    w = BeamformerWeights(np.ones((cfg.freq_bins, 2), dtype=complex), 0, cfg)
    with pytest.raises(ValueError, match="config mismatch"):
        apply_mvdr(np.zeros((2, 4096)), w, StftConfig(2048, 512, 2048))


def _static_scene(split="left_right"):
    fs = 48000
    n = fs  # 1 s
    tgt = synthetic_speech(1, 1.0)
    itf = synthetic_speech(2, 1.0)
    if split == "left_right":
        p_t, p_i = [3.0, 4.5, 1.5], [3.0, 1.5, 1.5]
    else:
        p_t, p_i = [3.0, 4.6, 1.5], [3.0, 3.4, 1.5]
    mk = lambda p: Trajectory(np.tile(p, (240, 1)))
    return SceneSpec(
        room_dims=[6.0, 6.0, 3.0],
        sources=[SceneSource(mk(p_t), tgt, "t"), SceneSource(mk(p_i), itf, "i")],
        array_pose=ArrayPose(np.array([3.0, 3.0, 1.5])),
        geometry=binaural_rig(),
        absorption=1.0,
        max_image_order=0,
    )


def test_oracle_mvdr_pipeline_improves():
    scene = _static_scene()
    mix, stems = render_scene(scene, return_stems=True)
    bf = MvdrBeamformer().fit(mix, stems[0])
    est = bf.transform(mix)[0]
    before = si_sdr(mix[0], stems[0][0])
    after = si_sdr(est, stems[0][0])
    assert after - before > 5.0


def test_block_adaptive_mode_runs():
    scene = _static_scene()
    mix, stems = render_scene(scene, return_stems=True)
    bf = MvdrBeamformer(block_adaptive=True, block_seconds=0.5).fit(mix, stems[0])
    est = bf.transform(mix)
    assert est.shape == (1, mix.shape[1])
    before = si_sdr(mix[0], stems[0][0])
    after = si_sdr(est[0], stems[0][0])
    assert after - before > 3.0


def test_estimator_api():
    bf = MvdrBeamformer(block_adaptive=True, diagonal_loading=1e-5)
    params = bf.get_params()
    assert params["diagonal_loading"] == 1e-5
    twin = clone(bf)
    assert twin.get_params() == params
    with pytest.raises(ValueError, match="not fitted"):
        MvdrBeamformer().transform(np.zeros((2, 4096)))
    with pytest.raises(ValueError, match="target stem"):
        MvdrBeamformer().fit(np.zeros((2, 4096)))


def test_beamformed_output_scales_with_input():
    scene = _static_scene()
    mix, stems = render_scene(scene, return_stems=True)
    bf = MvdrBeamformer().fit(mix, stems[0])
    out1 = bf.transform(mix)
    bf2 = MvdrBeamformer().fit(3.0 * mix, 3.0 * stems[0])
    out2 = bf2.transform(3.0 * mix)
    assert np.allclose(out2, 3.0 * out1, atol=1e-6 * np.max(np.abs(out1)))