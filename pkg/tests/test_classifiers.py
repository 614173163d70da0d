from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from pahaw.classifiers import (
    AdaBoostModel,
    KnnModel,
    SvmConfig,
    SvmModel,
    adaboost_train,
    grid_scores,
    grid_search_svm,
    grid_values,
    kkt_audit,
    knn_predict,
    knn_train,
    load_model,
    rbf_gram,
    rbf_kernel,
    svm_train,
)
from pahaw.classifiers import grid as grid_module
from pahaw.errors import DimensionMismatch, EmptyModel, SingleClass, SolverStallWarning, TooFewSamples


def two_gaussians(n=100, seed=0, centre=3.0, sd=0.5, d=2):
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack([rng.normal(centre, sd, (half, d)), rng.normal(-centre, sd, (n - half, d))])
    y = np.r_[np.ones(half), -np.ones(n - half)]
    return X, y


XOR_X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
XOR_Y = np.array([1, 1, -1, -1])


# --- kernel -----------------------------------------------------------------


def test_kernel_identity_and_scale():
    assert rbf_kernel([1.0, 2.0], [1.0, 2.0], 0.7) == 1.0
    g = 1.3
    x = np.array([0.0, 0.0])
    xi = np.array([g, g])  # squared distance 2 g^2
    assert rbf_kernel(x, xi, g) == pytest.approx(math.exp(-1), abs=1e-15)


@given(st.integers(0, 100_000))
def test_kernel_matches_direct_formula(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 6))
    x, xi = rng.normal(size=d), rng.normal(size=d)
    g = float(2.0 ** rng.uniform(-3, 3))
    dist2 = sum((a - b) ** 2 for a, b in zip(x, xi))
    assert abs(rbf_kernel(x, xi, g) - math.exp(-dist2 / (2 * g * g))) <= 1e-12
    K = rbf_gram(np.vstack([x, xi]), gamma=g)
    assert abs(K[0, 1] - math.exp(-dist2 / (2 * g * g))) <= 1e-12


def test_kernel_arguments():
    with pytest.raises(DimensionMismatch):
        rbf_kernel([1.0, 2.0], [1.0], 1.0)
    with pytest.raises(ValueError):
        rbf_kernel([1.0], [1.0], 0.0)


@pytest.mark.parametrize("gamma", [0.1, 1.0, 10.0])
def test_gram_matrix_is_psd(gamma):
    rng = np.random.default_rng(int(gamma * 10))
    for _ in range(100):
        A = rng.normal(size=(20, int(rng.integers(1, 6))))
        K = rbf_gram(A, gamma=gamma)
        assert np.array_equal(K, K.T)
        assert np.linalg.eigvalsh(K).min() >= -1e-8


# --- SVM --------------------------------------------------------------------


def test_separable_gaussians():
    X, y = two_gaussians()
    model = svm_train(X, y, SvmConfig(c=1.0, gamma=1.0))
    assert (model.predict(X) == y).all()
    assert kkt_audit(model, X, y).ok


def test_xor():
    model = svm_train(XOR_X, XOR_Y, SvmConfig(c=10.0, gamma=1.0))
    assert (model.predict(XOR_X) == XOR_Y).all()
    assert kkt_audit(model, XOR_X, XOR_Y).ok


@pytest.mark.parametrize("c", [0.1, 1.0, 10.0, 100.0])
@pytest.mark.parametrize("gamma", [0.3, 1.0, 4.0])
def test_kkt_audit_on_noisy_data(c, gamma):
    X, y = two_gaussians(60, seed=5, centre=0.6, sd=1.0, d=3)
    model = svm_train(X, y, SvmConfig(c=c, gamma=gamma))
    report = kkt_audit(model, X, y, tolerance=1e-3)
    assert report.ok, report
    coef = np.abs(model.dual_coefficients)
    assert (coef > 0).all() and (coef <= c * (1 + 1e-12)).all()
    assert abs(model.dual_coefficients.sum()) <= 1e-3


def _dual_oracle(X, y, c, gamma):
    """Dual objective optimum from a general-purpose constrained optimizer."""
    K = rbf_gram(X, gamma=gamma)
    Q = (y[:, None] * y[None, :]) * K

    def obj(a):
        return 0.5 * a @ Q @ a - a.sum()

    def grad(a):
        return Q @ a - 1.0

    res = minimize(
        obj,
        np.zeros(len(y)),
        jac=grad,
        method="SLSQP",
        bounds=[(0, c)] * len(y),
        constraints=[{"type": "eq", "fun": lambda a: a @ y, "jac": lambda a: y}],
        options={"ftol": 1e-12, "maxiter": 1000},
    )
    return res.fun


@pytest.mark.parametrize("seed", range(4))
def test_dual_objective_matches_generic_optimizer(seed):
    X, y = two_gaussians(30, seed=seed, centre=0.8, sd=1.0)
    c, gamma = 2.0, 1.5
    model = svm_train(X, y, SvmConfig(c=c, gamma=gamma, tolerance=1e-6))
    a = model.dual_coefficients
    K = rbf_gram(model.support_vectors, gamma=gamma)
    smo = 0.5 * a @ K @ a - np.abs(a).sum()
    assert smo == pytest.approx(_dual_oracle(X, y, c, gamma), rel=1e-5)


def test_training_row_order_is_irrelevant():
    X, y = two_gaussians(50, seed=2, centre=0.5, sd=1.0)
    cfg = SvmConfig(c=3.0, gamma=0.8)
    perm = np.random.default_rng(9).permutation(len(y))
    a, b = svm_train(X, y, cfg), svm_train(X[perm], y[perm], cfg)
    Q = np.random.default_rng(1).normal(size=(40, 2))
    np.testing.assert_array_equal(a.decision_function(Q), b.decision_function(Q))


def test_zero_one_labels_and_json_round_trip():
    X, y = two_gaussians(40, seed=3)
    model = svm_train(X, (y > 0).astype(int), SvmConfig(c=1.0, gamma=2.0))
    back = load_model(model.to_json())
    assert isinstance(back, SvmModel)
    np.testing.assert_array_equal(back.decision_function(X), model.decision_function(X))
    assert back.config == model.config


def test_svm_errors():
    with pytest.raises(SingleClass):
        svm_train(np.zeros((4, 2)), np.ones(4))
    with pytest.raises(ValueError):
        SvmConfig(c=-1.0)
    with pytest.raises(ValueError):
        SvmConfig(gamma=0.0)
    model = svm_train(XOR_X, XOR_Y, SvmConfig(c=10.0, gamma=1.0))
    with pytest.raises(DimensionMismatch):
        model.predict(np.zeros((1, 3)))


def test_iteration_cap_warns_and_flags():
    X, y = two_gaussians(60, seed=5, centre=0.3, sd=1.0)
    with pytest.warns(SolverStallWarning):
        model = svm_train(X, y, SvmConfig(c=100.0, gamma=0.5, max_passes=3))
    assert not model.converged


# --- grid search ------------------------------------------------------------


def test_full_grid_size():
    c, g = grid_values("full")
    assert len(c) * len(g) == 17 * 19 == 323
    assert c[0] == 2.0**-8 and c[-1] == 2.0**8
    assert g[0] == 2.0**-9 and g[-1] == 2.0**9
    c, g = grid_values("reduced")
    assert len(c) * len(g) == 25


def test_selection_follows_scores_and_tie_rule():
    X, y = two_gaussians(36, seed=4, centre=0.7, sd=1.0)
    c_values, g_values, correct = grid_scores(X, y, grid="reduced", seed=3)
    best = None
    for i, c in enumerate(c_values):
        for j, g in enumerate(g_values):
            key = (-correct[i, j], c, g)
            best = key if best is None or key < best else best
    cfg = grid_search_svm(X, y, grid="reduced", seed=3)
    assert (cfg.c, cfg.gamma) == (best[1], best[2])


def test_unique_perfect_candidate_is_chosen(monkeypatch):
    c_values, g_values = grid_values("full")
    scores = np.full((len(c_values), len(g_values)), 20, dtype=np.int64)
    scores[11, 4] = 24

    def fake(*args, **kwargs):
        return c_values, g_values, scores

    monkeypatch.setattr(grid_module, "grid_scores", fake)
    cfg = grid_module.grid_search_svm(np.zeros((24, 1)), np.r_[np.ones(12), np.zeros(12)])
    assert (cfg.c, cfg.gamma) == (2.0**3, 2.0**-5)


def test_grid_search_is_deterministic_and_parallel_safe():
    X, y = two_gaussians(30, seed=8, centre=0.6, sd=1.0)
    a = grid_scores(X, y, grid="reduced", seed=5)[2]
    b = grid_scores(X, y, grid="reduced", seed=5, n_jobs=3)[2]
    np.testing.assert_array_equal(a, b)
    assert grid_search_svm(X, y, grid="reduced", seed=5) == grid_search_svm(X, y, grid="reduced", seed=5)


def test_grid_needs_enough_rows_per_class():
    X = np.arange(8.0).reshape(-1, 1)
    with pytest.raises(TooFewSamples):
        grid_search_svm(X, np.r_[np.ones(2), np.zeros(6)], grid="reduced")


# --- AdaBoost ---------------------------------------------------------------


def test_threshold_learnable_line():
    x = np.linspace(-1, 1, 40).reshape(-1, 1)
    y = np.where(x[:, 0] > 0.13, 1, -1)
    model = adaboost_train(x, y, max_rounds=10, seed=1)
    assert model.learner_errors[0] < 0.5
    assert (model.predict(x) == y).all()


def test_training_error_non_increasing_on_separable_data():
    X, y = two_gaussians(80, seed=6, centre=1.0, sd=0.8, d=4)
    model = adaboost_train(X, y, max_rounds=60, seed=2)
    errors = [np.mean(np.where(F >= 0, 1, -1) != y) for F in model.staged_decision(X)]
    assert all(b <= a for a, b in zip(errors, errors[1:]))
    assert errors[-1] == 0.0
    assert (model.learner_errors < 0.5).all()
    assert np.all(np.isfinite(model.learner_weights)) and (model.learner_weights > 0).all()


@given(st.integers(0, 10_000))
def test_label_flip_flips_decisions(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30, 5))
    y = np.where(rng.random(30) < 0.5, 1, -1)
    y[:2] = [1, -1]
    a = adaboost_train(X, y, max_rounds=15, seed=seed)
    b = adaboost_train(X, -y, max_rounds=15, seed=seed)
    np.testing.assert_array_equal(b.decision_function(X), -a.decision_function(X))


def test_adaboost_respects_depth_and_rounds():
    X, y = two_gaussians(60, seed=7, centre=0.2, sd=1.0, d=9)
    model = adaboost_train(X, y, max_rounds=25, max_depth=3, seed=0)
    assert 1 <= model.rounds_used <= 25
    assert all(t.depth <= 3 for t in model.weak_learners)


def test_adaboost_json_and_determinism():
    X, y = two_gaussians(40, seed=1, centre=0.5, sd=1.0, d=6)
    a = adaboost_train(X, y, max_rounds=20, seed=4)
    b = adaboost_train(X, y, max_rounds=20, seed=4)
    assert a.to_json() == b.to_json()
    back = load_model(a.to_json())
    assert isinstance(back, AdaBoostModel)
    np.testing.assert_array_equal(back.decision_function(X), a.decision_function(X))


def test_adaboost_single_class():
    with pytest.raises(SingleClass):
        adaboost_train(np.zeros((5, 2)), np.zeros(5))


# --- K-NN -------------------------------------------------------------------


def _brute_knn(points, labels, q, k):
    d = [(float(((p - q) ** 2).sum()), i) for i, p in enumerate(points)]
    chosen = []
    for _ in range(k):
        best = min(x for x in d if x[1] not in chosen)
        chosen.append(best[1])
    vote = sum(labels[i] for i in chosen)
    return 1 if vote > 0 else -1


def test_knn_simple_votes():
    m = knn_train(np.array([[0.0], [1.0], [2.0], [10.0]]), np.array([1, 1, -1, -1]), k=3)
    assert knn_predict(m, [0.4]) == 1
    m1 = knn_train(np.array([[0.0], [5.0]]), np.array([1, -1]), k=1)
    assert knn_predict(m1, [5.0]) == -1


def test_knn_matches_brute_force_on_fuzzed_queries():
    rng = np.random.default_rng(12)
    P = np.round(rng.normal(size=(40, 3)), 1)  # rounding creates distance ties
    L = np.where(rng.random(40) < 0.5, 1.0, -1.0)
    model = knn_train(P, L, k=3)
    Q = np.round(rng.normal(size=(500, 3)), 1)
    got = model.predict(Q)
    expected = [_brute_knn(P, L, q, 3) for q in Q]
    assert got.tolist() == expected


def test_knn_one_neighbour_memorizes():
    X, y = two_gaussians(50, seed=3, centre=0.1, sd=1.0)
    model = knn_train(X, y, k=1)
    assert (model.predict(X) == y).all()


def test_knn_validation():
    with pytest.raises(ValueError):
        KnnModel(np.zeros((4, 1)), np.ones(4), k=2)
    with pytest.raises(ValueError):
        KnnModel(np.zeros((2, 1)), np.ones(2), k=3)
    with pytest.raises(EmptyModel):
        knn_predict(KnnModel(np.zeros((0, 1)), np.zeros(0), k=1), [0.0])


def test_knn_json_round_trip():
    X, y = two_gaussians(20, seed=2)
    model = knn_train(X, y)
    back = load_model(model.to_json())
    np.testing.assert_array_equal(back.predict(X), model.predict(X))


def test_trainers_are_silent_on_clean_data():
    X, y = two_gaussians(40, seed=11)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        svm_train(X, y, SvmConfig(c=1.0, gamma=1.0))
        adaboost_train(X, y, max_rounds=5)
        knn_train(X, y)
