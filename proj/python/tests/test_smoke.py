import json
import math

import numpy as np
import pytest

import mesr


def random_clip(n=8, h=24, w=24, seed=0):
    return np.random.default_rng(seed).random((n, h, w))


def test_lbp_code_patch():
    patch = (5 * np.arange(5)[:, None] + np.arange(5)[None, :]) / 24.0
    assert mesr.lbp_code(patch, 2, 2, p=8, r=1) == 225
    assert mesr.lbp_code(np.full((5, 5), 0.3), 2, 2, p=8, r=2) == 255


def test_hog_and_higo_spans():
    a = 0.05
    theta = np.array([0, 0, 0, math.pi / 2, math.pi / 2, math.pi / 2])
    mag = np.array([a, a, a, 4 * a, 4 * a, 4 * a])
    higo = mesr.hog_histogram(theta, mag, 8, count=True)
    hog = mesr.hog_histogram(theta, mag, 8)
    assert higo[4] == pytest.approx(0.5) and higo[6] == pytest.approx(0.5)
    assert hog[4] == pytest.approx(0.2) and hog[6] == pytest.approx(0.8)


def test_top_descriptors_slice():
    clip = random_clip()
    top = mesr.lbp_top(clip, (2, 2, 1), "TOP", r=1).reshape(4, 3, -1)
    xot = mesr.lbp_top(clip, (2, 2, 1), "XOT", r=1).reshape(4, 1, -1)
    np.testing.assert_array_equal(top[:, 1:2, :], xot)
    higo = mesr.higo_top(clip, (2, 2, 1), "TOP")
    assert higo.shape == (4 * 3 * 8,)
    assert np.linalg.norm(higo) == pytest.approx(1.0)
    assert mesr.hog_top(clip, (1, 1, 1), "XYOT", norm="None").shape == (16,)


def test_tim_reproduces_and_resamples():
    clip = random_clip(n=7, h=16, w=16, seed=1)
    np.testing.assert_allclose(mesr.tim_interpolate(clip, 7), clip, atol=1e-9)
    assert mesr.tim_interpolate(clip, 10).shape == (10, 16, 16)


def test_magnify_identity_and_shape():
    clip = random_clip(n=10, h=64, w=64, seed=2)
    np.testing.assert_allclose(mesr.magnify(clip, alpha=1.0), clip, atol=1e-9)
    assert mesr.magnify(clip, alpha=4.0).shape == clip.shape


def test_spotting_primitives():
    assert mesr.interval_length(0.32, 25.0) == 9
    d = np.zeros((60, 36))
    d[30] = 1.0
    f, c, valid = mesr.difference_series(d, k=4)
    assert valid == (8, 51)
    peaks, threshold = mesr.detect_peaks(list(c), valid, 0.5, 4)
    assert peaks == [30]
    assert 0.0 < threshold < c[30]
    assert mesr.roc_auc([(0.0, 1.0)]) == pytest.approx(1.0)


def test_svm_round_trip():
    rng = np.random.default_rng(3)
    labels = [0, 1, 2] * 10
    x = rng.normal(size=(30, 3)) * 0.2 + 5.0 * np.eye(3)[labels]
    model = mesr.svm_train(x, labels, cost=1.0)
    assert model.predict(x) == labels
    again = mesr.SvmModel.from_json(model.to_json())
    assert again.predict(x) == labels
    report = mesr.loso_evaluate(x, labels, [f"s{i % 5}" for i in range(30)])
    assert report["accuracy"] == pytest.approx(1.0)


def test_validation_errors_map_to_value_error():
    with pytest.raises(ValueError):
        mesr.tim_interpolate(random_clip(n=1, h=16, w=16), 10)
    with pytest.raises(ValueError):
        mesr.lbp_top(random_clip(), (1, 1, 1), "DIAGONAL")


def test_pipeline_end_to_end(tmp_path):
    corpus = mesr.synthesize(tmp_path / "spot", kind="spot", sequences=4, subjects=2, frames=100, seed=5)
    out = mesr.synthesize(tmp_path / "mesr", kind="mesr", subjects=3, per_class=1, frames=100, seed=6)
    spot = mesr.run_spot(corpus["manifest"], tmp_path / "spot_out")
    assert 0.0 <= spot["auc"] <= 1.0
    assert len(spot["roc"]) == 21
    assert (tmp_path / "spot_out" / "roc.csv").exists()
    rec = json.loads(mesr.run_recognize(out["clips"]))
    assert rec["total"] == 9
    config = json.loads(mesr.default_config())
    assert config["tim_length"] == 10
