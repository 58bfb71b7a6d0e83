import json

import numpy as np
import pytest

import ovabench


def test_heads_listed():
    assert ovabench.HEADS == ("softmax", "dm", "ova", "ova_dm")


def test_softmax_rows_sum_to_one():
    z = np.random.default_rng(0).normal(size=(5, 4))
    p = ovabench.probabilities("softmax", z)
    assert p.shape == (5, 4)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_ova_dm_probability_at_zero_distance():
    p = ovabench.probabilities("ova_dm", np.array([[0.0, -1.0]]))
    assert p[0, 0] == 1.0
    assert p[0, 1] == pytest.approx(2.0 / (1.0 + np.exp(1.0)))


def test_ova_dm_loss_fixed_value():
    value = ovabench.loss("ova_dm", np.array([[-0.5, -2.0, -3.0]]), np.array([0]))
    assert value == pytest.approx(0.6529278050484366, rel=1e-12)


@pytest.mark.parametrize("head", ["softmax", "dm", "ova", "ova_dm"])
def test_logit_gradient_matches_finite_differences(head):
    rng = np.random.default_rng(1)
    z = -np.abs(rng.normal(size=(3, 4))) - 0.1
    y = np.array([0, 2, 3])
    g = ovabench.logit_gradient(head, z, y)
    h = 1e-6
    for idx in np.ndindex(z.shape):
        up, down = z.copy(), z.copy()
        up[idx] += h
        down[idx] -= h
        numeric = (ovabench.loss(head, up, y) - ovabench.loss(head, down, y)) / (2 * h)
        assert g[idx] == pytest.approx(numeric, rel=1e-5, abs=1e-8)


def test_unknown_head_raises():
    with pytest.raises(ValueError):
        ovabench.probabilities("sparsemax", np.zeros((1, 2)))


def test_bad_shape_raises():
    with pytest.raises(ValueError):
        ovabench.probabilities("softmax", np.zeros(3))


def test_gen_ring_is_seeded():
    x, y = ovabench.gen_ring(per_class=20, seed=3)
    x2, _ = ovabench.gen_ring(per_class=20, seed=3)
    assert x.shape == (200, 2)
    assert y.dtype.kind == "i"
    assert np.array_equal(x, x2)
    means = ovabench.ring_means()
    for k in range(10):
        assert np.linalg.norm(x[y == k].mean(axis=0) - means[k]) < 1.5


def test_corrupt_rotation_preserves_norms():
    x, _ = ovabench.gen_ring(per_class=5, seed=1)
    r = ovabench.corrupt(x, "rotation", 3)
    np.testing.assert_allclose(np.linalg.norm(r, axis=1), np.linalg.norm(x, axis=1), rtol=1e-12)


def test_ood_points_avoid_means():
    means = ovabench.ring_means()
    pts = ovabench.gen_ood(500, means, seed=2)
    d = np.linalg.norm(pts[:, None, :] - means[None, :, :], axis=2)
    assert d.min() >= 8.0
    assert np.abs(pts).max() <= 50.0


def test_ece_and_ranking():
    conf = np.array([0.2, 0.8])
    value, table = ovabench.ece(conf, np.array([0, 1]), np.array([1, 1]), bins=2)
    assert value == pytest.approx(0.2)
    assert [b["count"] for b in table] == [1, 1]
    auroc, auprc = ovabench.auroc_auprc(np.array([0.1, 0.4, 0.35, 0.8]), np.array([False, False, True, True]))
    assert auroc == pytest.approx(0.75)
    assert 0.0 < auprc <= 1.0


def test_boxplot_matches_numpy():
    v = np.random.default_rng(4).normal(size=37)
    s = ovabench.boxplot_stats(v)
    q = np.percentile(v, [0, 25, 50, 75, 100])
    assert [s["min"], s["q1"], s["median"], s["q3"], s["max"]] == pytest.approx(list(q), rel=1e-12)


def test_pca_matches_numpy_eigen():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(300, 3)) * np.array([4.0, 2.0, 0.5])
    res = ovabench.pca2(x)
    evals = np.sort(np.linalg.eigvalsh(np.cov(x, rowvar=False)))[::-1]
    assert res["eigenvalues"] == pytest.approx(tuple(evals[:2]), rel=1e-8)
    assert res["projected"].shape == (300, 2)


def test_train_and_predict():
    cfg = ovabench.default_config()
    cfg["optimizer"]["steps"] = 300
    cfg["head"] = "ova_dm"
    x, y = ovabench.gen_ring(per_class=50, seed=0)
    model, acc = ovabench.train(cfg, x, y)
    assert model.head == "ova_dm"
    assert 0.0 <= acc <= 1.0
    labels, conf = model.predict(x)
    assert labels.shape == (500,)
    assert np.all((conf > 0.0) & (conf <= 1.0))


def test_run_all_writes_artifacts(tmp_path):
    cfg = ovabench.default_config()
    cfg["dataset"]["per_class"] = 30
    cfg["optimizer"]["steps"] = 100
    cfg["landscape"]["resolution"] = 10
    cfg["heads"] = ["softmax", "ova_dm"]
    cfg["output_dir"] = str(tmp_path)
    ok, err = ovabench.run_all(cfg)
    assert ok, err
    assert json.loads((tmp_path / "MANIFEST.json").read_text())["complete"] is True
    model = ovabench.Model.load(str(tmp_path / "ova_dm" / "checkpoint.json"))
    assert model.probabilities(np.zeros((2, 2))).shape == (2, 10)
    assert (tmp_path / "softmax" / "landscape.csv").exists()
