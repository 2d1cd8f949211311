import math
from fractions import Fraction

import numpy as np
import pytest

from touchauth.classifiers import (
    KNN,
    RandomForest,
    SVM,
    TrainConfig,
    dumps,
    loads,
    predict,
    score,
    train,
)
from touchauth.classifiers.forest import best_split, grow_tree
from touchauth.classifiers.svm import dual_objective, kernel_matrix
from touchauth.errors import ConfigError, TrainingError


def blobs(rng, n=160, d=24, shift=1.5):
    y = np.r_[np.ones(n // 2, dtype=int), np.zeros(n - n // 2, dtype=int)]
    X = rng.normal(size=(n, d)) + shift * y[:, None]
    return X, y


# -- oracles ------------------------------------------------------------------


def brute_force_split(X, y):
    """Exact (Fraction) weighted-Gini search; first minimum in (feature, threshold) order."""
    best = None
    n = len(y)
    for f in range(X.shape[1]):
        values = sorted(set(X[:, f].tolist()))
        for lo, hi in zip(values, values[1:]):
            t = (lo + hi) / 2
            left = [int(c) for x, c in zip(X[:, f], y) if x <= t]
            right = [int(c) for x, c in zip(X[:, f], y) if x > t]
            def gini(part):
                p = Fraction(sum(part), len(part))
                return 1 - p * p - (1 - p) * (1 - p)
            g = Fraction(len(left), n) * gini(left) + Fraction(len(right), n) * gini(right)
            if best is None or g < best[2]:
                best = (f, t, g)
    return best


def brute_force_knn_score(X, y, v, k):
    dists = []
    for i, row in enumerate(X):
        d = 0.0
        for a, b in zip(row, v):
            d += (a - b) * (a - b)
        dists.append((d, i))
    dists.sort()
    return sum(int(y[i]) for _, i in dists[:k]) / k


# -- KNN ------------------------------------------------------------------------


def test_knn_stores_training_set(rng):
    X, y = blobs(rng)
    model = train(TrainConfig(algorithm="knn"), X, y)
    assert isinstance(model, KNN)
    assert model.X.shape == (160, 24)
    assert np.array_equal(model.X, X) and np.array_equal(model.y, y)


def test_knn_coincident_genuine_points():
    X = np.r_[np.zeros((5, 3)), np.ones((20, 3)) * 5.0]
    y = np.r_[np.ones(5, dtype=int), np.zeros(20, dtype=int)]
    model = train(TrainConfig(algorithm="knn", knn_k=5), X, y)
    assert score(model, np.zeros(3)) == 1.0


def test_knn_matches_exhaustive_scan(rng):
    X, y = blobs(rng, shift=0.7)
    model = train(TrainConfig(algorithm="knn", knn_k=5), X, y)
    queries = rng.normal(size=(1000, 24)) + 0.35
    got = score(model, queries)
    expected = [brute_force_knn_score(X, y, q, 5) for q in queries]
    assert got.tolist() == expected


def test_knn_distance_ties_prefer_lower_index():
    X = np.array([[1.0], [-1.0], [1.0], [-1.0], [3.0]])
    y = np.array([0, 1, 1, 0, 1])
    model = KNN(X, y, k=3)
    assert model.neighbors(np.array([0.0])).tolist() == [0, 1, 2]
    assert model.score(np.array([[0.0]]))[0] == pytest.approx(2 / 3)


# -- SVM ------------------------------------------------------------------------


def test_svm_two_point_max_margin():
    X = np.array([[0.0, 0.0], [2.0, 2.0]])
    y = np.array([0, 1])
    model = train(TrainConfig(algorithm="svm", svm_kernel="linear", svm_c=1e6), X, y)
    w, b = model.weights(), model.bias
    # boundary w.x + b = 0 must be x + y = 2
    assert w[0] / -b == pytest.approx(0.5, abs=1e-3)
    assert w[1] / -b == pytest.approx(0.5, abs=1e-3)
    assert abs(score(model, [1.0, 1.0])) < 1e-3
    assert 2.0 / np.linalg.norm(w) == pytest.approx(2 * math.sqrt(2), abs=1e-2)


def test_svm_dual_constraints_and_monotone_objective(rng):
    X, y = blobs(rng, shift=0.8)
    config = TrainConfig(algorithm="svm", svm_c=1.0, seed=3)
    model = SVM.fit(X, y, config, record=True)
    alpha = model.full_alpha
    signs = np.where(y == 1, 1.0, -1.0)
    assert np.all(alpha >= 0) and np.all(alpha <= config.svm_c)
    assert abs(alpha @ signs) <= 1e-6
    history = np.array(model.objective_history)
    assert len(history) > 1
    assert np.all(np.diff(history) >= -1e-9 * np.abs(history).max())
    K = kernel_matrix(X, X, "rbf", 1 / 24)
    assert dual_objective(alpha, signs, K) == pytest.approx(history[-1], rel=1e-9)
    # KKT satisfied at exit, or non-convergence is reported
    assert model.converged == (model.kkt_violation <= config.svm_tol)


@pytest.mark.parametrize("seed", range(5))
def test_svm_reports_convergence(seed):
    rng = np.random.default_rng(seed)
    X, y = blobs(rng, n=60, d=4, shift=2.0)
    model = train(TrainConfig(algorithm="svm", svm_kernel="linear", seed=seed,
                              svm_max_passes=50), X, y)
    assert model.converged and model.kkt_violation <= 1e-3


def test_svm_scores_are_raw_margins(rng):
    X, y = blobs(rng)
    model = train(TrainConfig(algorithm="svm"), X, y)
    K = kernel_matrix(X[:3], model.support_vectors, "rbf", 1 / 24)
    expected = K @ (model.alpha * model.labels) + model.bias
    assert np.allclose(score(model, X[:3]), expected, rtol=0, atol=1e-12)


# -- random forest --------------------------------------------------------------


@pytest.mark.parametrize("instance", range(50))
def test_single_split_matches_brute_force_gini(instance):
    rng = np.random.default_rng(1000 + instance)
    d = 4
    if instance % 2:
        X = rng.integers(0, 5, size=(20, d)).astype(float)  # many ties
    else:
        X = rng.normal(size=(20, d))
    y = rng.integers(0, 2, size=20)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    config = TrainConfig(algorithm="rf", rf_trees=1, rf_max_depth=1, rf_bootstrap=False,
                         rf_features_per_split=d)
    model = train(config, X, y)
    tree = model.trees[0]
    f, t, g = brute_force_split(X, y)
    assert (int(tree.feature[0]), float(tree.threshold[0])) == (f, t)
    assert best_split(X, y.astype(float), np.arange(d))[2] == pytest.approx(float(g), abs=1e-12)


def test_tree_leaves_hold_genuine_fractions(rng):
    X, y = blobs(rng, n=40, d=3, shift=0.3)
    tree = grow_tree(X, y.astype(float), rng, max_depth=2)
    assert np.all((tree.value >= 0) & (tree.value <= 1))
    assert tree.value[0] == pytest.approx(y.mean())


def test_forest_all_trees_vote_impostor(rng):
    X, y = blobs(rng, shift=6.0)
    model = train(TrainConfig(algorithm="rf", rf_trees=25), X, y)
    assert score(model, np.full(24, -10.0)) == 0.0
    assert score(model, np.full(24, 20.0)) == 1.0
    s = score(model, X)
    assert np.all((s >= 0) & (s <= 1))


def test_forest_score_variance_shrinks_with_more_trees():
    rng = np.random.default_rng(7)
    X, y = blobs(rng, n=60, d=5, shift=0.5)
    queries = rng.normal(size=(8, 5)) + 0.25
    spreads = []
    for trees in (10, 100, 500):
        per_seed = [train(TrainConfig(algorithm="rf", rf_trees=trees, seed=s), X, y).score(queries)
                    for s in range(6)]
        spreads.append(np.var(np.array(per_seed), axis=0).mean())
    assert spreads[0] > spreads[1] > spreads[2]


# -- uniform interface ------------------------------------------------------------


def test_predict_threshold_rule(rng):
    X, y = blobs(rng, n=20, d=2)
    model = train(TrainConfig(algorithm="knn", knn_k=5), X, y)
    v = X[0]
    s = score(model, v)
    assert predict(model, v, threshold=s).genuine  # boundary inclusive
    assert not predict(model, v, threshold=s + 1e-9).genuine
    d = predict(model, v)
    assert d.threshold == 0.5 and d.verdict == ("genuine" if s >= 0.5 else "impostor")
    svm = train(TrainConfig(algorithm="svm"), X, y)
    assert predict(svm, v).threshold == 0.0


def test_threshold_sweep_flips_each_sample_once(rng):
    X, y = blobs(rng)
    model = train(TrainConfig(algorithm="svm"), X, y)
    queries = X[:30]
    scores = score(model, queries)
    thresholds = np.r_[-np.inf, np.sort(np.unique(scores)), np.inf]
    verdicts = np.array([[predict(model, q, t).genuine for q in queries] for t in thresholds])
    flips = np.abs(np.diff(verdicts.astype(int), axis=0)).sum(axis=0)
    assert np.all(flips == 1)
    assert verdicts[0].all() and not verdicts[-1].any()


@pytest.mark.parametrize("algo", ["rf", "svm", "knn"])
def test_serialization_round_trip_and_determinism(algo, rng):
    X, y = blobs(rng, shift=0.6)
    config = TrainConfig(algorithm=algo, rf_trees=15, seed=42)
    a, b = train(config, X, y), train(config, X, y)
    text = dumps(a)
    assert text == dumps(b)
    back = loads(text)
    queries = rng.normal(size=(50, 24))
    assert np.allclose(score(back, queries), score(a, queries), rtol=0, atol=1e-12)
    assert back.config == config
    with pytest.raises(ValueError):
        loads('{"format": "other"}')


def test_training_errors(rng):
    X, y = blobs(rng, n=20, d=3)
    with pytest.raises(TrainingError, match="single class"):
        train(TrainConfig(algorithm="rf"), X, np.ones(20, dtype=int))
    bad = X.copy()
    bad[2, 1] = np.nan
    with pytest.raises(TrainingError, match="non-finite"):
        train(TrainConfig(algorithm="svm"), bad, y)
    with pytest.raises(TrainingError, match="exceeds"):
        train(TrainConfig(algorithm="knn", knn_k=21), X, y)
    model = train(TrainConfig(algorithm="knn"), X, y)
    with pytest.raises(ValueError):
        score(model, [np.inf, 0, 0])


@pytest.mark.parametrize(
    "kwargs",
    [
        {"knn_k": 4},
        {"knn_k": 161},
        {"rf_trees": 0},
        {"svm_c": 0},
        {"svm_c": -1.0},
        {"svm_kernel": "poly"},
        {"algorithm": "xgboost"},
        {"seed": -1},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs)


def test_config_defaults():
    c = TrainConfig()
    assert (c.rf_trees, c.rf_min_leaf, c.knn_k, c.svm_c, c.svm_kernel) == (100, 1, 5, 1.0, "rbf")
    assert c.features_per_split(24) == 5
    assert c.gamma(24) == pytest.approx(1 / 24)
    assert (c.svm_tol, c.svm_max_passes) == (1e-3, 10)
    assert TrainConfig.from_dict(c.to_dict()) == c
    assert isinstance(RandomForest.fit(np.eye(4), np.array([0, 1, 0, 1]), c), RandomForest)
