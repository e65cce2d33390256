import math

import numpy as np
import pytest

import evsplat as es


def test_event_roundtrip_through_simulator_and_bins():
    thr = es.Thresholds(0.2, 0.3)
    frames = [np.full((2, 3), v) for v in (0.5, 0.5 * math.exp(0.45), 0.5 * math.exp(0.45 - 0.65))]
    ts = es.exposure_timestamps(0.0, 1.0, 3)
    stream = es.simulate_events(frames, ts, thr)
    assert len(stream) == 2 * 6 + 2 * 6
    assert set(stream.p.tolist()) == {-1, 1}
    counts = es.accumulate_window(stream, ts[0], ts[1], 3, 2)
    assert counts.shape == (2, 3) and (counts == 2).all()
    est = es.estimate_event_bin(frames[0], frames[1], thr)
    assert np.abs(est - counts).max() <= 1


def test_edi_mean_matches_blurry_and_example_value():
    stream = es.EventStream(np.array([0.7]), np.array([0]), np.array([0]), np.array([1]), 0.0, 1.0)
    latents = es.reconstruct_latents(np.full((1, 1, 3), 0.5), stream, 2, es.Thresholds(0.2, 0.3))
    assert latents[0][0, 0, 0] == pytest.approx(1.0 / (1.0 + math.exp(0.2)), abs=1e-12)
    assert np.allclose(es.synthesize_blur(latents), 0.5)


def test_metrics_identities():
    rng = np.random.default_rng(0)
    a = rng.random((16, 16, 3))
    assert es.psnr(a, a) == 100.0
    assert es.ssim(a, a) == pytest.approx(1.0, abs=1e-12)
    b = rng.random((16, 16, 3))
    assert es.ssim(a, b) == es.ssim(b, a)


def test_render_single_gaussian():
    g = es.Gaussian()
    g.mean = [0.0, 0.0, 2.0]
    g.log_scale = [math.log(0.05)] * 3
    g.opacity_logit = 2.0
    g.color = [1.0, 0.0, 0.0]
    cam = es.Camera(es.Pose(), es.Intrinsics(20.0, 20.0, 8.0, 8.0, 17, 17))
    image, alpha = es.render([g], cam, [0.0, 0.0, 1.0])
    assert image.shape == (17, 17, 3) and alpha.shape == (17, 17)
    peak = 1.0 / (1.0 + math.exp(-2.0))
    assert alpha[8, 8] == pytest.approx(peak, rel=1e-12)
    assert image[8, 8, 0] == pytest.approx(peak, rel=1e-12)
    assert image[0, 0, 2] == pytest.approx(1.0 - alpha[0, 0], abs=1e-12)
    tiled, _ = es.render([g], cam, [0.0, 0.0, 1.0], threads=2)
    ref, _ = es.render([g], cam, [0.0, 0.0, 1.0], tiled=False)
    assert np.abs(tiled - ref).max() < 1e-12


def test_dataset_train_evaluate(tmp_path):
    manifest = es.simulate_dataset(tmp_path / "data", seed=2, width=24, height=24, gaussians=20, views=2,
                                   test_views=1)
    ds = es.load_dataset(manifest)
    assert ds.view_names == ["view_000", "view_001"] and ds.n_latents == 5
    gt = es.read_scene(tmp_path / "data" / "ground_truth.scene")
    assert es.evaluate(gt, ds, "novel-view")["psnr"] == 100.0

    init = ds.initial_scene()
    scene, history = es.train(ds, init, {"iterations": 30, "seed": 5, "w_event": 0.01})
    assert len(history) == 30 and len(scene) == len(init)
    assert history[-1]["total"] < history[0]["total"]
    again, _ = es.train(ds, init, {"iterations": 30, "seed": 5, "w_event": 0.01})
    assert all(x == y for x, y in zip(scene, again))


def test_errors_surface_as_exceptions(tmp_path):
    with pytest.raises(es.Error, match="missing-file"):
        es.load_dataset(tmp_path / "absent.json")
    with pytest.raises(es.Error):
        es.estimate_event_bin(np.zeros((2, 2)), np.zeros((3, 3)))
    with pytest.raises(es.Error, match="unknown config key"):
        es.train(es.load_dataset(es.simulate_dataset(tmp_path / "d", width=16, height=16, gaussians=5, views=1,
                                                     test_views=0)), [], {"bogus": 1})
