import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pipeattrib.config_space import builtin_space, enumerate_configurations, make_configuration, parse_space
from pipeattrib.evaluators import (
    EPS,
    EvaluationError,
    EvaluatorSpec,
    MiniMLEvaluator,
    cross_entropy,
    evaluate,
    fit_predict_proba,
    fit_transform_step,
    make_cv_splits,
    make_evaluator,
)
from pipeattrib.evaluators.data import (
    Dataset,
    DatasetError,
    MINI150_MEANS,
    Xoshiro256,
    _splitmix64,
    dataset_to_csv,
    generate_mini150,
    load_mini150,
    parse_csv,
)
from pipeattrib.evaluators.learners import DecisionTree, KNN
from pipeattrib.evaluators.synthetic import SyntheticSurface
from pipeattrib.evaluators.transforms import PCA, Polynomial, RandomProjection, Standardize, jacobi_eigh

from importlib import resources


@pytest.fixture(scope="module")
def mini():
    return load_mini150()


# data generator


def test_splitmix64_reference_value():
    # first output for seed 0 in the published reference implementation
    assert next(_splitmix64(0)) == 0xE220A8397B1DCDAF


def test_xoshiro_is_deterministic_and_in_range():
    a, b = Xoshiro256(42), Xoshiro256(42)
    xs = [a.next_u64() for _ in range(100)]
    assert xs == [b.next_u64() for _ in range(100)]
    assert all(0 <= x < 2**64 for x in xs)
    u = [Xoshiro256(1).uniform() for _ in range(3)]
    assert all(0.0 <= v < 1.0 for v in u)


def test_shipped_mini150_matches_generator():
    shipped = resources.files("pipeattrib.data").joinpath("mini150.csv").read_text(encoding="utf-8")
    assert shipped == dataset_to_csv(generate_mini150())


def test_mini150_shape_and_class_means(mini):
    assert mini.features.shape == (150, 4)
    assert np.bincount(mini.labels).tolist() == [50, 50, 50]
    for c, mean in enumerate(MINI150_MEANS):
        assert np.allclose(mini.features[mini.labels == c].mean(axis=0), mean, atol=0.5)


def test_dataset_validation():
    with pytest.raises(DatasetError):
        Dataset(np.zeros((3, 2)), np.array([0, 0, 0]), 2)
    with pytest.raises(DatasetError):
        Dataset(np.array([[np.nan], [1.0]]), np.array([0, 1]), 2)
    with pytest.raises(DatasetError, match="line 2"):
        parse_csv("1.0,2.0,0\nx,1.0,1\n")


# cross-validation


def test_stratified_folds_exact_on_mini150(mini):
    split = make_cv_splits(mini, 5, seed=0)
    for fold in range(5):
        _, valid = split.train_valid(fold)
        assert np.bincount(mini.labels[valid], minlength=3).tolist() == [10, 10, 10]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(2, 23), min_size=2, max_size=4), st.integers(2, 5), st.integers(0, 1000))
def test_stratified_folds_balanced_within_one(class_sizes, k, seed):
    k = min(k, min(class_sizes))
    labels = np.repeat(np.arange(len(class_sizes)), class_sizes)
    ds = Dataset(np.zeros((len(labels), 1)), labels, len(class_sizes))
    split = make_cv_splits(ds, k, seed)
    assert sorted(set(split.folds.tolist())) == list(range(k))
    for c in range(len(class_sizes)):
        per_fold = np.bincount(split.folds[labels == c], minlength=k)
        assert per_fold.max() - per_fold.min() <= 1
    sizes = np.bincount(split.folds, minlength=k)
    assert sizes.max() - sizes.min() <= 1


def test_cv_errors_and_determinism(mini):
    with pytest.raises(ValueError):
        make_cv_splits(mini, 1)
    with pytest.raises(ValueError, match="smallest class"):
        make_cv_splits(mini, 51)
    assert np.array_equal(make_cv_splits(mini, 5, 3).folds, make_cv_splits(mini, 5, 3).folds)


# cross-entropy


def test_cross_entropy_cases():
    y = np.array([0, 1, 2])
    assert cross_entropy(np.eye(3), y) == pytest.approx(-math.log(1 - EPS))
    assert cross_entropy(np.full((3, 3), 1 / 3), y) == pytest.approx(math.log(3))
    zero = np.array([[0.0, 1.0, 0.0]])
    assert cross_entropy(zero, np.array([0])) == pytest.approx(-math.log(EPS))
    assert math.isfinite(cross_entropy(zero, np.array([0])))


def test_cross_entropy_errors():
    with pytest.raises(ValueError, match="shape"):
        cross_entropy(np.eye(3), np.array([0, 1]))
    with pytest.raises(ValueError, match="sum to 1"):
        cross_entropy(np.array([[0.5, 0.6]]), np.array([0]))


# transforms


def test_standardize_moments(mini):
    Z = fit_transform_step("standardize", {}, mini.features, mini.features)
    assert np.allclose(Z.mean(axis=0), 0, atol=1e-9)
    assert np.allclose(Z.std(axis=0), 1, atol=1e-6)


def test_standardize_flags_constant_column():
    X = np.column_stack([np.arange(5.0), np.ones(5)])
    t = Standardize().fit(X)
    assert t.degenerate_
    assert np.all(np.isfinite(t.transform(X)))


def test_pca_whitened_variance_is_one(mini):
    Z = fit_transform_step("pca", {"whiten": True, "n_components": 2}, mini.features, mini.features)
    assert np.allclose(Z.var(axis=0), 1, atol=1e-6)
    assert np.allclose(np.cov(Z.T, bias=True), np.eye(2), atol=1e-6)


def test_pca_components_orthonormal_and_capped(mini):
    p = PCA(whiten=False, n_components=9).fit(mini.features)
    W = p.components_
    assert W.shape == (4, 4)
    assert np.abs(W.T @ W - np.eye(4)).max() < 1e-8


def test_pca_matches_numpy_projection_up_to_sign(mini):
    X = mini.features
    p = PCA(n_components=3).fit(X)
    w, V = np.linalg.eigh(np.cov(X.T, bias=True))
    V = V[:, ::-1][:, :3]
    assert np.allclose(np.abs(p.components_.T @ V), np.eye(3), atol=1e-8)


def test_pca_flags_degenerate_whitening():
    X = np.column_stack([np.arange(6.0), np.zeros(6)])
    p = PCA(whiten=True, n_components=2).fit(X)
    assert p.degenerate_
    assert np.all(np.isfinite(p.transform(X)))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(-10, 10, allow_nan=False)))
def test_jacobi_matches_numpy(M):
    A = (M + M.T) / 2
    w, V = jacobi_eigh(A)
    ref = np.linalg.eigvalsh(A)[::-1]
    scale = max(1.0, np.linalg.norm(A))
    assert np.allclose(w, ref, atol=1e-8 * scale)
    assert np.abs(V.T @ V - np.eye(6)).max() < 1e-8
    assert np.allclose(A @ V, V * w, atol=1e-7 * scale)
    for j in range(6):
        assert V[np.argmax(np.abs(V[:, j])), j] > 0


def test_jacobi_rejects_asymmetric():
    with pytest.raises(ValueError):
        jacobi_eigh([[1.0, 2.0], [0.0, 1.0]])


def test_polynomial_terms():
    X = np.arange(8.0).reshape(2, 4)
    assert np.array_equal(fit_transform_step("polynomial", {"degree": 1}, X, X), X)
    Z = Polynomial(2).fit(X).transform(X)
    assert Z.shape == (2, 4 + 10)
    assert Z[1, 4] == X[1, 0] ** 2


def test_random_projection_seeded():
    X = np.random.default_rng(0).standard_normal((10, 4))
    a = RandomProjection(3).fit(X, seed=5).transform(X)
    b = RandomProjection(3).fit(X, seed=5).transform(X)
    c = RandomProjection(3).fit(X, seed=6).transform(X)
    assert a.shape == (10, 3) and np.array_equal(a, b) and not np.array_equal(a, c)


def test_transforms_fit_on_train_rows_only(mini):
    space = builtin_space("miniml")
    ev = MiniMLEvaluator(space, mini, 5, 0)
    config = make_configuration(space, ["polynomial", "pca", "knn"], {"degree": 2, "whiten": True, "n_components": 3, "k": 3})
    train, valid = ev.split.train_valid(0)
    X = mini.features.copy()
    before, _ = ev.fit_pipeline(config, X[train], mini.labels[train])
    X[valid] += 100.0
    after, _ = ev.fit_pipeline(config, X[train], mini.labels[train])
    for t0, t1 in zip(before, after):
        for name in ("mean_", "components_", "scale_"):
            if hasattr(t0, name):
                assert np.array_equal(getattr(t0, name), getattr(t1, name))


# learners


def test_knn_self_query_smoothing():
    X = np.array([[0.0, 0.0], [5.0, 5.0], [9.0, 0.0]])
    y = np.array([0, 1, 2])
    P = fit_predict_proba("knn", {"k": 1}, (X, y), X[:1], 3)
    assert P[0, 0] == pytest.approx(0.5)
    assert P.sum() == pytest.approx(1.0)


def test_knn_k_too_large():
    with pytest.raises(ValueError, match="exceeds"):
        KNN(5).fit(np.zeros((3, 1)), np.array([0, 1, 0]), 2)


def test_tree_separates_linear_data():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, (80, 2))
    y = (X[:, 0] + 0.3 * X[:, 1] > 0).astype(int)
    P = fit_predict_proba("decision_tree", {"max_depth": 2}, (X, y), X, 2)
    assert cross_entropy(P, y) < math.log(2)


@pytest.mark.parametrize("learner, values", [("knn", {"k": 3}), ("decision_tree", {"max_depth": 4})])
def test_constant_labels_give_smoothed_one_hot(learner, values):
    X = np.random.default_rng(2).standard_normal((10, 2))
    y = np.ones(10, dtype=int)
    P = fit_predict_proba(learner, values, (X, y), X[:4], 3)
    n = 3 if learner == "knn" else 10
    expected = np.array([1, n + 1, 1]) / (n + 3)
    assert np.allclose(P, expected)


def _gini_oracle(X, y, C, min_leaf):
    """Best (feature, threshold) by exhaustive weighted-Gini search."""
    best, best_g = None, None
    n = len(y)
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            t = 0.5 * (lo + hi)
            m = X[:, f] <= t
            if m.sum() < min_leaf or (~m).sum() < min_leaf:
                continue
            g = 0.0
            for part in (y[m], y[~m]):
                p = np.bincount(part, minlength=C) / len(part)
                g += len(part) / n * (1 - (p**2).sum())
            if best_g is None or g < best_g - 1e-12:
                best, best_g = (f, t), g
    return best


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_tree_root_split_matches_exhaustive_gini(seed, min_leaf):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, (25, 3)).astype(float)
    y = rng.integers(0, 3, 25)
    if len(np.unique(y)) < 2:
        return
    tree = DecisionTree(max_depth=1, min_samples_leaf=min_leaf).fit(X, y, 3)
    expected = _gini_oracle(X, y, 3, min_leaf)
    got = None if tree.root_.left is None else (tree.root_.feature, tree.root_.threshold)
    assert got == expected


def test_tree_tie_goes_to_lowest_feature():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    y = np.array([0, 0, 1, 1])
    tree = DecisionTree(max_depth=1).fit(X, y, 2)
    assert (tree.root_.feature, tree.root_.threshold) == (0, 1.5)


def test_tree_rejects_zero_depth():
    with pytest.raises(ValueError):
        DecisionTree(max_depth=0)


# evaluators


def test_loss_table_lookup(fix6):
    space, ev = fix6
    cfg = make_configuration(space, ["A", "C"], {"a": 1, "c": 2})
    assert ev(cfg) == 0.20
    assert evaluate(EvaluatorSpec("loss-table", table_path="builtin:fix6_losses"), cfg, space) == 0.20


def test_loss_table_missing_id(fix6):
    space, _ = fix6
    ev = make_evaluator(EvaluatorSpec("loss-table", table={}), space)
    with pytest.raises(EvaluationError, match="missing"):
        ev(make_configuration(space, ["B", "C"], {"c": 1}))


def test_evaluator_spec_validation():
    with pytest.raises(ValueError):
        EvaluatorSpec("oracle")
    with pytest.raises(ValueError):
        EvaluatorSpec("loss-table")
    with pytest.raises(ValueError):
        EvaluatorSpec("mini-ml", k=1)
    spec = EvaluatorSpec.from_dict({"kind": "synthetic", "noise_std": 0.1})
    assert EvaluatorSpec.from_dict(spec.to_dict()) == spec


def test_synthetic_surface_optimum_and_order(fig3):
    space, ev = fig3
    losses = {c.canonical_id: ev(c) for c in enumerate_configurations(space)}
    best = min(losses, key=losses.get)
    assert losses[best] == pytest.approx(0.18)
    assert best == (
        "feature_extraction=haralick(distance=2)|feature_transformation=pca(whitening=true)"
        "|learning=random_forest(n_estimators=300,max_features=0.5)"
    )
    assert max(losses.values()) == pytest.approx(0.5253125)
    assert all(ev(c) == losses[c.canonical_id] for c in enumerate_configurations(space)[:50])


def test_synthetic_noise_is_seeded(fig3):
    space, _ = fig3
    cfg = enumerate_configurations(space)[17]
    noisy = SyntheticSurface(space, noise_std=0.05, noise_seed=3)
    assert noisy(cfg) == noisy(cfg) == SyntheticSurface(space, noise_std=0.05, noise_seed=3)(cfg)
    assert noisy(cfg) != SyntheticSurface(space, noise_std=0.05, noise_seed=4)(cfg)
    assert noisy.noiseless(cfg) == SyntheticSurface(space)(cfg)


def test_synthetic_needs_coefficients(fix6):
    space, _ = fix6
    with pytest.raises(ValueError, match="no coefficients"):
        SyntheticSurface(space)


def test_miniml_losses_are_bounded_and_repeatable(miniml):
    space, ev = miniml
    configs = enumerate_configurations(space)
    for cfg in configs[::53]:
        r1, r2 = ev.evaluate(cfg), ev.evaluate(cfg)
        assert 0 < r1.loss <= -math.log(EPS)
        assert r1 == r2
        assert len(r1.fold_losses) == 5
        assert r1.loss == pytest.approx(np.mean(r1.fold_losses))


def test_miniml_failure_names_the_fold(mini):
    doc = {
        "steps": [
            {"name": "f", "algorithms": [{"name": "raw"}]},
            {"name": "l", "algorithms": [{"name": "knn", "hyperparameters": [{"name": "k", "type": "int", "values": [500]}]}]},
        ]
    }
    space = parse_space(doc)
    ev = MiniMLEvaluator(space, mini)
    with pytest.raises(EvaluationError, match="fold 0"):
        ev(enumerate_configurations(space)[0])
