import json

import numpy as np
import pytest
from scipy.signal import fftconvolve

from regionsep.sim import (
    AMBIGUOUS,
    INTERFERENCE,
    TARGET,
    ArrayGeometry,
    ArrayPose,
    RegionSplit,
    SceneSource,
    SceneSpec,
    Trajectory,
    binaural_rig,
    classify_region,
    image_source_rir,
    render_moving_source,
    render_scene,
    sample_trajectory,
    scene_from_dict,
    scene_to_dict,
    synthetic_speech,
)

SAMPLE_DIST = 343.0 / 48000.0  # meters traveled in one sample


def _single_mic_scene(sources, room=(10.0, 10.0, 4.0), center=(5.0, 5.0, 1.5), **kw):
    geometry = ArrayGeometry(np.zeros((1, 3)))
    pose = ArrayPose(np.asarray(center))
    defaults = dict(absorption=1.0, max_image_order=0)
    defaults.update(kw)
    return SceneSpec(
        room_dims=np.asarray(room), sources=sources, array_pose=pose,
        geometry=geometry, **defaults,
    )


def test_trajectory_sample_counts():
    traj = sample_trajectory(0, [[0, 0, 0], [2, 2, 2]], duration=3.0, max_speed=1.0)
    assert traj.n_samples == 720
    assert traj.rate == 240.0


def test_trajectory_zero_speed_is_constant():
    traj = sample_trajectory(1, [[0, 0, 0], [2, 2, 2]], duration=1.0, max_speed=0.0)
    assert np.all(traj.positions == traj.positions[0])


def test_trajectory_speed_limit_and_bounds():
    bounds = np.array([[0.5, 1.0, 0.0], [2.5, 4.0, 2.0]])
    for seed in range(8):
        traj = sample_trajectory(seed, bounds, duration=4.0, max_speed=1.3)
        steps = np.linalg.norm(np.diff(traj.positions, axis=0), axis=1)
        assert steps.max() <= 1.3 / 240.0 + 1e-15
        assert np.all(traj.positions >= bounds[0] - 1e-12)
        assert np.all(traj.positions <= bounds[1] + 1e-12)


def test_trajectory_degenerate_bounds():
    with pytest.raises(ValueError, match="bounds"):
        sample_trajectory(0, [[1, 1, 1], [0, 2, 2]], duration=1.0, max_speed=1.0)


def test_rir_direct_path_arithmetic():
    # distance of exactly 480 samples of travel: impulse at 480, amplitude 1/3.43
    room = [10.0, 10.0, 4.0]
    src = np.array([1.0, 5.0, 1.5])
    mic = src + [3.43, 0.0, 0.0]
    rir = image_source_rir(room, src, mic, max_order=0, absorption=1.0)
    assert rir[480] == pytest.approx(1.0 / 3.43, rel=1e-12)
    other = np.delete(rir, 480)
    assert np.max(np.abs(other)) == 0.0


def test_rir_inverse_distance_law():
    room = [10.0, 10.0, 4.0]
    src = np.array([1.0, 5.0, 1.5])
    near = src + [3.43, 0.0, 0.0]
    far = src + [6.86, 0.0, 0.0]
    r_near = image_source_rir(room, src, near, max_order=0, absorption=1.0)
    r_far = image_source_rir(room, src, far, max_order=0, absorption=1.0)
    assert r_near.max() / r_far.max() == pytest.approx(2.0, rel=1e-12)


def test_rir_first_order_cube_arrivals():
    # oracle: hand-computed image positions for a first-order reflection set
    L = 4.0
    room = [L, L, L]
    src = np.array([3.37, 0.91, 1.76])
    mic = np.array([3.32, 1.38, 1.52])
    images = [src]
    for axis in range(3):
        for mirrored in (-src[axis], 2 * L - src[axis]):
            img = src.copy()
            img[axis] = mirrored
            images.append(img)
    dists = np.array([np.linalg.norm(img - mic) for img in images])
    delays = dists / 343.0 * 48000.0  # samples
    gaps = np.diff(np.sort(delays))
    assert gaps.min() > 8  # distinct, resolvable arrivals

    rir = image_source_rir(room, src, mic, max_order=1, absorption=0.0)
    for d, dist in zip(delays, dists):
        lo, hi = int(round(d)) - 16, int(round(d)) + 17
        peak = lo + np.argmax(np.abs(rir[lo:hi]))
        assert abs(peak - d) <= 1.0
    # nothing but those arrivals: far from every image the response is tiny
    mask = np.ones(rir.shape[0], dtype=bool)
    for d in delays:
        lo, hi = max(int(d) - 40, 0), min(int(d) + 41, rir.shape[0])
        mask[lo:hi] = False
    assert np.max(np.abs(rir[mask])) < 0.05 * (1.0 / dists.max())


def test_rir_rejects_outside_positions():
    with pytest.raises(ValueError, match="outside"):
        image_source_rir([4, 4, 4], [5, 1, 1], [1, 1, 1], max_order=0)
    with pytest.raises(ValueError, match="outside"):
        image_source_rir([4, 4, 4], [1, 1, 1], [1, -0.5, 1], max_order=0)


def test_render_static_equals_convolution():
    rng = np.random.default_rng(7)
    fs = 48000
    x = rng.standard_normal(fs // 2)
    pos = np.array([6.0, 6.3, 1.8])
    traj = Trajectory(np.tile(pos, (int(0.5 * 240) + 1, 1)))
    scene = _single_mic_scene(
        [SceneSource(traj, x)], absorption=0.7, max_image_order=1,
    )
    out = render_moving_source(scene, 0)
    rir = image_source_rir(
        scene.room_dims, pos, scene.mic_world_positions()[0],
        max_order=1, absorption=0.7,
    )
    expected = fftconvolve(x, rir)[: x.shape[0]]
    assert np.max(np.abs(out[0] - expected)) <= 1e-6 * np.max(np.abs(expected))


def test_render_zero_audio():
    traj = Trajectory(np.tile([6.0, 6.0, 1.5], (241, 1)))
    scene = _single_mic_scene([SceneSource(traj, np.zeros(48000))])
    assert np.all(render_moving_source(scene, 0) == 0)


def test_render_linearity():
    rng = np.random.default_rng(8)
    x = rng.standard_normal(24000)
    traj = sample_trajectory(3, [[4, 4, 1], [7, 7, 2]], duration=0.5, max_speed=1.0)
    s1 = _single_mic_scene([SceneSource(traj, x)], absorption=0.6, max_image_order=1)
    s2 = _single_mic_scene([SceneSource(traj, 2.5 * x)], absorption=0.6, max_image_order=1)
    a = render_moving_source(s1, 0)
    b = render_moving_source(s2, 0)
    assert np.max(np.abs(b - 2.5 * a)) <= 1e-9 * np.max(np.abs(b))


def test_render_radial_motion_attenuates_6db():
    # hold at 1 m, glide to 2 m, hold: end-to-end envelope drop of 6 dB
    rng = np.random.default_rng(9)
    fs = 48000
    x = rng.standard_normal(3 * fs)
    n = 720
    d = np.ones(n)
    hold = 96
    d[-hold:] = 2.0
    d[hold:-hold] = np.linspace(1.0, 2.0, n - 2 * hold)
    pos = np.stack([5.0 + d, np.full(n, 5.0), np.full(n, 1.5)], axis=1)
    scene = _single_mic_scene([SceneSource(Trajectory(pos), x)])
    out = render_moving_source(scene, 0)[0]
    rms_start = np.sqrt(np.mean(out[int(0.10 * fs):int(0.35 * fs)] ** 2))
    rms_end = np.sqrt(np.mean(out[int(2.65 * fs):int(2.90 * fs)] ** 2))
    drop = 20 * np.log10(rms_end / rms_start)
    assert drop == pytest.approx(-6.02, abs=0.5)


def test_render_superposition_is_exact():
    rng = np.random.default_rng(10)
    x1 = rng.standard_normal(12000)
    x2 = rng.standard_normal(12000)
    t1 = sample_trajectory(1, [[4, 4, 1], [6, 6, 2]], duration=0.25, max_speed=1.0)
    t2 = sample_trajectory(2, [[4, 4, 1], [6, 6, 2]], duration=0.25, max_speed=1.0)
    scene = _single_mic_scene(
        [SceneSource(t1, x1), SceneSource(t2, x2)], absorption=0.7, max_image_order=1,
    )
    mix, stems = render_scene(scene, return_stems=True)
    assert np.array_equal(mix, stems[0] + stems[1])


def test_render_requires_trajectory_coverage():
    traj = Trajectory(np.tile([5.0, 5.0, 1.5], (120, 1)))  # 0.5 s
    scene = _single_mic_scene([SceneSource(traj, np.zeros(48000))])
    with pytest.raises(ValueError, match="trajectory"):
        render_moving_source(scene, 0)


def test_direct_path_delay_consistency():
    # mic-pair arrival-time difference matches geometry within one sample
    room = [8.0, 7.0, 3.0]
    src = np.array([2.2, 4.9, 1.7])
    mics = np.array([[5.1, 2.0, 1.4], [6.2, 3.3, 1.6]])
    fs = 48000
    peaks = []
    for mic in mics:
        rir = image_source_rir(room, src, mic, max_order=0, absorption=1.0)
        peaks.append(np.argmax(np.abs(rir)))
    expected = (np.linalg.norm(src - mics[0]) - np.linalg.norm(src - mics[1])) / 343.0 * fs
    assert abs((peaks[0] - peaks[1]) - expected) <= 1.0


def test_classify_left_right():
    pose = ArrayPose(np.array([3.0, 3.0, 1.5]))
    geo = binaural_rig()
    split = RegionSplit("left_right")
    right = Trajectory(np.tile([3.0, 4.0, 1.5], (10, 1)))
    left = Trajectory(np.tile([3.0, 2.0, 1.5], (10, 1)))
    assert classify_region(right, pose, geo, split) == TARGET
    assert classify_region(left, pose, geo, split) == INTERFERENCE
    crossing = np.tile([3.0, 0.0, 1.5], (10, 1))
    crossing[:, 1] = 3.0 + np.linspace(-0.1, 0.1, 10)
    assert classify_region(Trajectory(crossing), pose, geo, split) == AMBIGUOUS


def test_classify_near_far_boundary():
    pose = ArrayPose(np.array([3.0, 3.0, 1.5]))
    geo = binaural_rig()
    split = RegionSplit("near_far", boundary=0.7)
    near = Trajectory(np.tile([3.0, 3.69, 1.5], (5, 1)))
    far = Trajectory(np.tile([3.0, 3.71, 1.5], (5, 1)))
    assert classify_region(near, pose, geo, split) == INTERFERENCE
    assert classify_region(far, pose, geo, split) == TARGET


def test_classify_rotation_invariance():
    rng = np.random.default_rng(11)
    geo = binaural_rig()
    for kind in ("left_right", "near_far"):
        split = RegionSplit(kind)
        pose = ArrayPose.yaw([4.0, 4.0, 1.5], 37.0)
        pts = np.array([4.0, 4.0, 1.5]) + rng.uniform(-1.5, 1.5, size=(20, 3))
        label = classify_region(Trajectory(pts), pose, geo, split)
        # rotate the whole world rigidly
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        if np.linalg.det(q) < 0:
            q[:, 0] *= -1
        t = rng.uniform(-2, 2, 3)
        pose2 = ArrayPose(q @ pose.position + t, q @ pose.rotation)
        pts2 = pts @ q.T + t
        assert classify_region(Trajectory(pts2), pose2, geo, split) == label


def test_scene_validation():
    traj = Trajectory(np.tile([5.0, 5.0, 1.5], (10, 1)))
    src = SceneSource(traj, np.zeros(100))
    with pytest.raises(ValueError, match="outside"):
        SceneSpec(
            room_dims=[4, 4, 4], sources=[src],
            array_pose=ArrayPose(np.array([9.0, 1.0, 1.0])),
            geometry=ArrayGeometry(np.zeros((1, 3))),
        )
    bad_traj = Trajectory(np.tile([5.0, 5.0, 9.9], (10, 1)))
    with pytest.raises(ValueError, match="leaves the room"):
        SceneSpec(
            room_dims=[6, 6, 3], sources=[SceneSource(bad_traj, np.zeros(10))],
            array_pose=ArrayPose(np.array([3.0, 3.0, 1.5])),
            geometry=ArrayGeometry(np.zeros((1, 3))),
        )
    with pytest.raises(ValueError, match="absorption"):
        SceneSpec(
            room_dims=[6, 6, 3], sources=[],
            array_pose=ArrayPose(np.array([3.0, 3.0, 1.5])),
            geometry=ArrayGeometry(np.zeros((1, 3))),
            absorption=1.4,
        )


def test_scene_json_round_trip(tmp_path):
    traj = sample_trajectory(5, [[4, 4, 1], [6, 6, 2]], duration=0.25, max_speed=1.0)
    audio = synthetic_speech(3, 0.25)
    scene = SceneSpec(
        room_dims=[8, 7, 3],
        sources=[SceneSource(traj, audio, "voice")],
        array_pose=ArrayPose.yaw([4.0, 3.5, 1.5], 20.0),
        absorption=[0.5, 0.5, 0.6, 0.6, 0.7, 0.7],
    )
    doc = scene_to_dict(scene)
    text = json.dumps(doc)
    back = scene_from_dict(json.loads(text))
    assert back.sample_rate == scene.sample_rate
    assert np.allclose(back.room_dims, scene.room_dims)
    assert np.allclose(back.absorption, scene.absorption)
    assert np.allclose(back.array_pose.rotation, scene.array_pose.rotation)
    assert np.allclose(back.sources[0].trajectory.positions, traj.positions, atol=1e-5)
    assert np.allclose(back.sources[0].audio, audio)
    with pytest.raises(ValueError, match="schema_version"):
        scene_from_dict({"schema_version": 99, "room_dims": [1, 1, 1]})


def test_synthetic_speech_properties():
    x = synthetic_speech(0, 1.0)
    assert x.shape == (48000,)
    assert np.max(np.abs(x)) <= 0.5 + 1e-9
    assert np.std(x) > 0.01
    assert np.array_equal(x, synthetic_speech(0, 1.0))
