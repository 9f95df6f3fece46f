import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from faultpred.learners import (
    LearnerSpec,
    TrainingError,
    Tree,
    derive_seed,
    fit_logistic,
    model_from_dict,
    train,
    train_ann,
    train_dtf,
    train_logr,
    train_rbfn,
)
from faultpred.learners.ann import forward, hidden_units, init_params, loss_and_grad, mse
from faultpred.learners.forest import ForestModel
from faultpred.learners.logr import LogisticModel
from faultpred.learners.rbfn import default_k
from oracles import central_difference, logistic_grid_mle

FAST = {
    "LOGR": {},
    "ANN": {"epochs": 80},
    "RBFN_RAN": {"epochs": 80},
    "RBFN_KMC": {"epochs": 80},
    "RBFN_FCM": {"epochs": 80},
    "DTF": {"n_trees": 9},
}


def _data(n=60, p=4, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, p))
    y = (X[:, 0] + 0.3 * rng.standard_normal(n) > 0.5).astype(int)
    y[:2] = [0, 1]
    return X, y


# -- shared contract ---------------------------------------------------------------


@pytest.mark.parametrize("kind", list(FAST))
def test_deterministic_and_scored(kind):
    X, y = _data()
    spec = LearnerSpec(kind, FAST[kind], seed=11)
    a, b = train(spec, X, y), train(spec, X, y)
    sa, sb = a.predict_score(X), b.predict_score(X)
    assert np.array_equal(sa, sb)
    assert np.all(np.isfinite(sa)) and sa.min() >= 0 and sa.max() <= 1
    np.testing.assert_array_equal(a.predict(X), (sa >= 0.5).astype(int))


@pytest.mark.parametrize("kind", list(FAST))
def test_serialization_roundtrip(kind):
    X, y = _data(seed=2)
    m = train(LearnerSpec(kind, FAST[kind], seed=3), X, y)
    again = model_from_dict(m.to_dict())
    assert np.array_equal(again.predict_score(X), m.predict_score(X))
    assert again.training_score == m.training_score


def test_model_format_version_checked():
    X, y = _data()
    doc = train_logr(X, y).to_dict()
    doc["format_version"] = 99
    with pytest.raises(ValueError):
        model_from_dict(doc)


def test_derive_seed_stable_and_order_sensitive():
    assert derive_seed(1, "ant", "ANN", 0) == derive_seed(1, "ant", "ANN", 0)
    assert derive_seed(1, "ant", "ANN", 0) != derive_seed(1, "ANN", "ant", 0)
    assert 0 <= derive_seed("x") < 2**63


def test_single_class_rejected():
    with pytest.raises(ValueError):
        train_logr(np.zeros((4, 2)), np.zeros(4))


# -- LOGR -------------------------------------------------------------------------


def test_logr_zero_iterations_gives_half():
    X, y = _data()
    m = train_logr(X, y, LearnerSpec("LOGR", {"max_iter": 0}))
    np.testing.assert_array_equal(m.predict_score(X), np.full(len(X), 0.5))


def test_logr_separable_1d_monotone():
    x = np.array([-2.0, -1.0, 1.0, 2.0])
    y = np.array([0, 0, 1, 1])
    m = train_logr(x[:, None], y)
    grid = np.linspace(-3, 3, 61)
    s = m.predict_score(grid[:, None])
    assert np.all(np.diff(s) > 0)
    assert m.training_score["accuracy"] == 1.0
    assert m.separated
    # the likelihood only grows along +slope; the grid optimum sits at the largest slope, zero intercept
    b0, b1 = logistic_grid_mle(x, y, np.linspace(-2, 2, 41), np.linspace(-5, 5, 101))
    assert b1 == 5.0 and b0 == 0.0
    assert m.weights[0] > 0 and abs(m.intercept) < 1e-6 * abs(m.weights[0])


def test_logr_matches_grid_mle_on_overlapping_data():
    rng = np.random.default_rng(4)
    x = rng.normal(size=300)
    y = (rng.random(300) < expit(-0.5 + 1.2 * x)).astype(int)
    fit = fit_logistic(x[:, None], y)
    b0, b1 = logistic_grid_mle(x, y, np.arange(-2, 2.0001, 0.01), np.arange(-1, 3.0001, 0.01))
    assert fit.coef[0] == pytest.approx(b0, abs=0.011)
    assert fit.coef[1] == pytest.approx(b1, abs=0.011)
    assert fit.converged and not fit.separated


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_logistic_symmetry(coef, x):
    m, neg = LogisticModel(coef), LogisticModel([-c for c in coef])
    xx = np.array([x])
    assert m.predict_score(xx)[0] + neg.predict_score(xx)[0] == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.floats(0.1, 20), st.floats(-10, 10))
def test_logr_boundary_affine_invariant(seed, a, b):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(80, 2))
    y = (rng.random(80) < expit(X[:, 0] - X[:, 1])).astype(int)
    y[:2] = [0, 1]
    m1 = train_logr(X, y)
    X2 = a * X + b
    m2 = train_logr(X2, y)
    # refit coefficients equal the original ones mapped through the inverse rescaling
    w = m1.weights / a
    c = m1.intercept - (b * w).sum()
    np.testing.assert_allclose(m2.weights, w, rtol=1e-4, atol=1e-6)
    assert m2.intercept == pytest.approx(c, rel=1e-4, abs=1e-5)
    eta = m1.decision_function(X)
    clear = np.abs(eta) > 1e-3
    np.testing.assert_array_equal(m1.predict(X)[clear], m2.predict(X2)[clear])


# -- ANN --------------------------------------------------------------------------


def test_hidden_units_rule():
    assert hidden_units(3) == 7
    assert hidden_units(20) == 20


def _rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


def test_gradient_check_321():
    rng = np.random.default_rng(0)
    X, y = rng.random((7, 3)), rng.integers(0, 2, 7).astype(float)
    params = init_params(3, 2, rng)
    params["b1"] = rng.normal(size=2)
    params["b2"] = rng.normal(size=1)
    _, g = loss_and_grad(params, X, y)
    for key in params:
        def f(theta, key=key):
            q = {k: v.copy() for k, v in params.items()}
            q[key] = theta.reshape(params[key].shape)
            return mse(q, X, y)
        fd = central_difference(f, params[key].ravel(), eps=1e-5).reshape(params[key].shape)
        assert _rel_err(g[key], fd) < 1e-5, key


def test_xor_learnable():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    y = np.array([0, 1, 1, 0])
    accs = [
        train_ann(X, y, LearnerSpec("ANN", {"hidden": 4, "alpha": 0.5, "epochs": 20000}, seed=s)).training_score["accuracy"]
        for s in range(5)
    ]
    assert max(accs) == 1.0


def test_zero_epochs_is_initial_network():
    X, y = _data()
    m = train_ann(X, y, LearnerSpec("ANN", {"epochs": 0, "alpha": 0.1}, seed=8))
    init = init_params(X.shape[1], hidden_units(X.shape[1]), np.random.default_rng(8))
    np.testing.assert_array_equal(m.predict_score(X), forward(init, X)[1])


def test_ann_alpha_chosen_from_grid():
    X, y = _data()
    m = train_ann(X, y, LearnerSpec("ANN", {"epochs": 50}, seed=1))
    assert m.hyperparams["alpha"] in (0.5, 0.1, 0.05, 0.01)


def test_ann_divergence_raises():
    X, y = _data()
    with pytest.raises(TrainingError):
        train_ann(X, y, LearnerSpec("ANN", {"epochs": 5, "alpha_grid": (np.inf,)}))


def test_ann_diverging_alpha_skipped():
    X, y = _data()
    m = train_ann(X, y, LearnerSpec("ANN", {"epochs": 20, "alpha_grid": (np.inf, 0.1)}))
    assert m.hyperparams["alpha"] == 0.1


# -- RBFN -------------------------------------------------------------------------


def test_default_k():
    assert default_k(3) == 2
    assert default_k(50) == 8
    assert default_k(10_000) == 30
    assert default_k(1) == 1


@pytest.mark.parametrize("variant", ["RAN", "KMC", "FCM"])
def test_rbfn_interpolates_with_one_center_per_record(variant):
    rng = np.random.default_rng(1)
    X = rng.random((12, 2))
    y = np.array([0, 1] * 6)
    m = train_rbfn(X, y, LearnerSpec(f"RBFN_{variant}", {"k": 12, "sigma": 0.01}, seed=0))
    if variant == "RAN":
        assert sorted(map(tuple, m.centers)) == sorted(map(tuple, X))
    if variant != "FCM":  # FCM centers are membership-weighted means, not the records
        assert m.training_score["accuracy"] == 1.0


def test_rbfn_k_too_large():
    X, y = _data(n=10)
    with pytest.raises(ValueError):
        train_rbfn(X, y, LearnerSpec("RBFN_KMC", {"k": 11}))


def _blobs(seed=0, n=200):
    rng = np.random.default_rng(seed)
    A = rng.normal([0.0, 0.0], 0.1, size=(n, 2))
    B = rng.normal([1.0, 1.0], 0.1, size=(n, 2))
    return np.vstack([A, B]), np.r_[np.zeros(n, int), np.ones(n, int)], A.mean(0), B.mean(0)


@pytest.mark.parametrize("variant", ["KMC", "FCM"])
def test_rbfn_centers_recover_blobs(variant):
    from oracles import lloyd_multi_restart

    X, y, ma, mb = _blobs()
    m = train_rbfn(X, y, LearnerSpec(f"RBFN_{variant}", {"k": 2, "epochs": 50}, seed=5))
    C = m.centers[np.argsort(m.centers[:, 0])]
    ref = lloyd_multi_restart(X, 2)
    ref = ref[np.argsort(ref[:, 0])]
    assert np.abs(C - np.vstack([ma, mb])).max() < 0.1
    assert np.abs(C - ref).max() < 0.1


def test_rbfn_widths_positive():
    X, y = _data()
    for kind in ("RBFN_RAN", "RBFN_KMC", "RBFN_FCM"):
        m = train(LearnerSpec(kind, FAST[kind]), X, y)
        assert np.all(m.widths > 0)


# -- DTF --------------------------------------------------------------------------


def test_single_full_tree_memorizes():
    X, y = _data(n=50)
    m = train_dtf(X, y, LearnerSpec("DTF", {"n_trees": 1, "bootstrap": False, "max_features": "all"}))
    assert m.training_score["accuracy"] == 1.0


def test_vote_arithmetic():
    m = ForestModel([Tree.leaf(1.0), Tree.leaf(1.0), Tree.leaf(0.0)])
    x = np.zeros((1, 3))
    assert m.predict_score(x)[0] == pytest.approx(2 / 3)
    assert m.predict(x)[0] == 1


def test_checkerboard():
    rng = np.random.default_rng(0)
    X = rng.random((100, 2))
    y = ((X[:, 0] > 0.5) ^ (X[:, 1] > 0.5)).astype(int)
    m = train_dtf(X, y, LearnerSpec("DTF", {"n_trees": 50}, seed=1))
    assert m.training_score["accuracy"] >= 0.95


def test_tree_splits_are_gini_optimal_on_stump():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    m = train_dtf(X, y, LearnerSpec("DTF", {"n_trees": 1, "bootstrap": False, "max_depth": 1}))
    t = m.trees[0]
    assert t.feature[0] == 0 and t.threshold[0] == pytest.approx(1.5)
