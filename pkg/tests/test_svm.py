import numpy as np
import pytest

from gazeadv.serialize import load_model, save_model
from gazeadv.svm import (
    SvmTrainConfig,
    svm_decision_values,
    svm_loss_gradient,
    svm_loss_gradient_batch,
    svm_predict,
    svm_predict_batch,
    svm_surrogate_loss,
    train_svm,
)


def blobs(rng, centers, n=30, sd=0.4):
    X, y = [], []
    for label, c in centers.items():
        X.append(rng.normal(c, sd, (n, len(c))))
        y += [label] * n
    return np.vstack(X), np.array(y, dtype=object)


def test_separated_blobs_reach_perfect_training_accuracy():
    rng = np.random.default_rng(0)
    X, y = blobs(rng, {"a": (0, 0), "b": (4, 4)})
    model = train_svm(X, y, SvmTrainConfig(gamma=0.5))
    assert np.mean(svm_predict_batch(model, X) == y) == 1.0


def test_xor_pattern_is_rbf_separable():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, (240, 2))
    X = X[np.min(np.abs(X), axis=1) > 0.05]  # keep away from the axes
    y = np.where(X[:, 0] * X[:, 1] > 0, "pos", "neg").astype(object)
    model = train_svm(X, y, SvmTrainConfig(C=10.0, gamma=2.0))
    assert np.mean(svm_predict_batch(model, X) == y) > 0.95
    # grid-search oracle: the learned decision map shows the XOR quadrants
    for qx, qy, label in ((0.6, 0.6, "pos"), (-0.6, -0.6, "pos"),
                          (0.6, -0.6, "neg"), (-0.6, 0.6, "neg")):
        grid = np.array([[qx + dx, qy + dy]
                         for dx in (-0.15, 0, 0.15) for dy in (-0.15, 0, 0.15)])
        pred = svm_predict_batch(model, grid)
        assert np.mean(pred == label) > 0.8


def test_kkt_conditions_hold_per_pair():
    rng = np.random.default_rng(2)
    X, y = blobs(rng, {"a": (0, 0), "b": (2, 0), "c": (1, 2)}, sd=0.7)
    config = SvmTrainConfig(C=1.0, gamma=0.5)
    model = train_svm(X, y, config)
    assert len(model.pairs) == 3
    for pair in model.pairs:
        assert abs(pair.dual_coef.sum()) < 1e-9
        assert np.all(np.abs(pair.dual_coef) <= config.C + 1e-12)
        assert len(pair.support_vectors) == len(pair.dual_coef)


def test_degenerate_and_invalid_inputs():
    X = np.zeros((10, 3))
    with pytest.raises(ValueError, match="degenerate"):
        train_svm(X, ["a"] * 10)
    X2 = X.copy()
    X2[0, 0] = np.nan
    with pytest.raises(ValueError, match="finite"):
        train_svm(X2, ["a"] * 5 + ["b"] * 5)


def test_predict_deep_inside_blob():
    rng = np.random.default_rng(3)
    X, y = blobs(rng, {"a": (0, 0), "b": (4, 4)})
    model = train_svm(X, y, SvmTrainConfig(gamma=0.5))
    cls, decisions = svm_predict(model, np.array([0.0, 0.0]))
    assert cls == "a"
    assert decisions.shape == (1,)


def test_predict_tie_break_is_deterministic():
    # symmetric 3-class configuration; the center is a perfect vote tie
    rng = np.random.default_rng(4)
    angles = [np.pi / 2, np.pi / 2 + 2 * np.pi / 3, np.pi / 2 + 4 * np.pi / 3]
    centers = {f"c{k}": (2 * np.cos(a), 2 * np.sin(a)) for k, a in enumerate(angles)}
    X, y = blobs(rng, centers, n=40, sd=0.3)
    model = train_svm(X, y, SvmTrainConfig(gamma=1.0))
    center = np.zeros(2)
    first = svm_predict(model, center)[0]
    for _ in range(5):
        assert svm_predict(model, center)[0] == first


def test_vote_tally_matches_recount():
    rng = np.random.default_rng(5)
    X, y = blobs(rng, {"a": (0, 0), "b": (2.5, 0), "c": (1, 2.5)}, sd=0.8)
    model = train_svm(X, y, SvmTrainConfig(gamma=0.5))
    pts = rng.uniform(-1, 3.5, (50, 2))
    preds = svm_predict_batch(model, pts)
    decisions = svm_decision_values(model, pts)
    for i in range(len(pts)):
        votes = {c: 0 for c in model.classes}
        signed = {c: 0.0 for c in model.classes}
        for p, pair in enumerate(model.pairs):
            d = decisions[i, p]
            winner = pair.class_a if d >= 0 else pair.class_b
            votes[winner] += 1
            signed[pair.class_a] += d
            signed[pair.class_b] -= d
        best = max(votes.values())
        tied = [c for c in model.classes if votes[c] == best]
        want = max(tied, key=lambda c: (signed[c], -model.classes.index(c)))
        assert preds[i] == want


def _random_toy_model(rng, n_classes=3, d=6, n=25, sd=0.9):
    centers = {f"c{k}": rng.uniform(-1.5, 1.5, d) for k in range(n_classes)}
    X, y = [], []
    for label, c in centers.items():
        X.append(rng.normal(c, sd, (n, d)))
        y += [label] * n
    return train_svm(np.vstack(X), np.array(y, dtype=object),
                     SvmTrainConfig(gamma=1.0 / d))


def _finite_difference(model, x, ref, h=1e-5):
    fd = np.zeros_like(x)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        fd[k] = (svm_surrogate_loss(model, x + e, ref)
                 - svm_surrogate_loss(model, x - e, ref)) / (2 * h)
    return fd


def _away_from_argmax_switch(model, x, ref, margin=1e-4):
    decisions = svm_decision_values(model, x[None, :])[0]
    values = []
    for c in model.classes:
        if c == ref:
            continue
        for p, pair in enumerate(model.pairs):
            if {pair.class_a, pair.class_b} == {c, ref}:
                values.append(decisions[p] if pair.class_a == c else -decisions[p])
    values = sorted(values, reverse=True)
    return len(values) < 2 or values[0] - values[1] > margin


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    checked = 0
    while checked < 100:
        model = _random_toy_model(rng)
        for _ in range(8):
            x = rng.uniform(-2, 2, model.n_features)
            ref = model.classes[int(rng.integers(len(model.classes)))]
            if not _away_from_argmax_switch(model, x, ref):
                continue
            grad = svm_loss_gradient(model, x, ref)
            fd = _finite_difference(model, x, ref)
            denom = max(np.linalg.norm(fd), 1e-12)
            assert np.linalg.norm(grad - fd) / denom < 1e-5
            checked += 1
    assert checked >= 100


def test_gradient_at_support_vector_kernel_term():
    # when x sits exactly on a support vector s, that term contributes
    # 2 * gamma * (s - x) * K = 0
    rng = np.random.default_rng(7)
    model = _random_toy_model(rng, n_classes=2, d=3, n=10)
    pair = model.pairs[0]
    s = pair.support_vectors[0]
    grad = svm_loss_gradient(model, s, model.classes[0])
    # gradient excluding the coincident vector reproduces the full gradient
    from gazeadv.svm import rbf_kernel
    K = rbf_kernel(s[None, :], pair.support_vectors, model.gamma)[0]
    w = pair.dual_coef * K
    manual = 2.0 * model.gamma * (w @ pair.support_vectors - w.sum() * s)
    # orientation: rival of classes[0] is classes[1] -> pair oriented -1
    assert np.allclose(grad, -manual)


def test_gradient_mirror_symmetry():
    # support vectors at (+1, 0) / (-1, 0): reflecting x across the y-axis
    # mirrors the loss gradient (x component kept, y component flipped)
    X = np.array([[1.0, 0.0], [-1.0, 0.0]])
    y = np.array(["a", "b"], dtype=object)
    model = train_svm(X, y, SvmTrainConfig(gamma=0.7))
    x = np.array([0.3, 0.4])
    g = svm_loss_gradient(model, x, "a")
    g_reflected = svm_loss_gradient(model, np.array([-x[0], x[1]]), "a")
    assert np.allclose(g_reflected, [g[0], -g[1]], atol=1e-10)


def test_zero_gradient_is_returned_not_raised():
    X = np.array([[1.0, 0.0], [-1.0, 0.0]])
    model = train_svm(X, ["a", "b"], SvmTrainConfig(gamma=0.7))
    far = np.array([0.0, 1e6])  # kernel underflows to exactly 0
    grad = svm_loss_gradient(model, far, "a")
    assert np.linalg.norm(grad) == 0.0


def test_batch_gradient_matches_single():
    rng = np.random.default_rng(9)
    model = _random_toy_model(rng)
    X = rng.uniform(-2, 2, (12, model.n_features))
    refs = [model.classes[int(rng.integers(3))] for _ in range(12)]
    batch = svm_loss_gradient_batch(model, X, refs)
    for i in range(12):
        assert np.allclose(batch[i], svm_loss_gradient(model, X[i], refs[i]))


def test_training_is_deterministic():
    rng = np.random.default_rng(10)
    X, y = blobs(rng, {"a": (0, 0), "b": (2, 1)}, sd=0.8)
    m1 = train_svm(X, y, SvmTrainConfig(gamma=0.5))
    m2 = train_svm(X, y, SvmTrainConfig(gamma=0.5))
    for p1, p2 in zip(m1.pairs, m2.pairs):
        assert np.array_equal(p1.support_vectors, p2.support_vectors)
        assert np.array_equal(p1.dual_coef, p2.dual_coef)
        assert p1.intercept == p2.intercept


def test_standardized_model_operates_in_raw_space():
    rng = np.random.default_rng(11)
    X, y = blobs(rng, {"a": (0, 0), "b": (50, 100)}, sd=(4.0))
    model = train_svm(X, y, SvmTrainConfig(), standardize=True)
    assert model.feature_mean is not None
    assert np.mean(svm_predict_batch(model, X) == y) == 1.0
    # finite differences validate the chain rule through the baked scaling
    x = X[3] + rng.normal(0, 1.0, 2)
    if _away_from_argmax_switch(model, x, "a"):
        grad = svm_loss_gradient(model, x, "a")
        fd = _finite_difference(model, x, "a", h=1e-4)
        assert np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12) < 1e-4


def test_dimension_mismatch_raises():
    rng = np.random.default_rng(12)
    X, y = blobs(rng, {"a": (0, 0), "b": (3, 3)})
    model = train_svm(X, y)
    with pytest.raises(ValueError):
        svm_predict(model, np.zeros(5))


def test_serialization_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(13)
    X, y = blobs(rng, {"a": (0, 0), "b": (2, 0), "c": (1, 2)}, sd=0.8)
    model = train_svm(X, y, SvmTrainConfig(gamma=0.3))
    path = tmp_path / "svm.json"
    save_model(path, model)
    loaded = load_model(path)
    assert loaded.classes == model.classes
    assert loaded.gamma == model.gamma
    for p1, p2 in zip(model.pairs, loaded.pairs):
        assert np.array_equal(p1.support_vectors, p2.support_vectors)
        assert np.array_equal(p1.dual_coef, p2.dual_coef)
        assert p1.intercept == p2.intercept
    save_model(tmp_path / "svm2.json", loaded)
    assert (tmp_path / "svm.json").read_bytes() == (tmp_path / "svm2.json").read_bytes()
