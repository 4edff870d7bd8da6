import itertools

import numpy as np
import pytest

from reshi import _kernels_py, kernels
from reshi.errors import DimensionMismatch, EmptyTrainingSet, ValidationError
from reshi.tree import RegressionTree, TreeParams, predict, train, training_mse


def test_constant_targets_single_leaf():
    X = np.random.default_rng(1).random((12, 3))
    tree = train(X, np.full(12, 7.0))
    assert tree.node_count == 1
    assert predict(tree, [0.3, 0.2, 0.9]) == 7.0
    assert training_mse(tree, X, np.full(12, 7.0)) == 0.0


def test_binary_feature_separable():
    X = np.array([[0], [0], [0], [1], [1], [1]], dtype=float)
    y = np.array([10.0, 10.0, 10.0, 20.0, 20.0, 20.0])
    tree = train(X, y)
    assert tree.node_count == 3
    assert tree.threshold[0] == 0.5
    assert predict(tree, [0]) == 10.0
    assert predict(tree, [1]) == 20.0


def stump_oracle_sse(X, y, min_leaf):
    """Lowest SSE over every single split, by brute force."""
    best = float(np.sum((y - y.mean()) ** 2))
    for f in range(X.shape[1]):
        values = np.unique(X[:, f])
        for a, b in zip(values, values[1:]):
            mask = X[:, f] <= (a + b) / 2
            if mask.sum() < min_leaf or (~mask).sum() < min_leaf:
                continue
            sse = np.sum((y[mask] - y[mask].mean()) ** 2) + np.sum((y[~mask] - y[~mask].mean()) ** 2)
            best = min(best, float(sse))
    return best


@pytest.mark.parametrize("seed", range(5))
def test_depth3_beats_exhaustive_stump(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((50, 6))
    y = 3 * X[:, 0] + np.sin(6 * X[:, 2]) + rng.normal(0, 0.1, 50)
    params = TreeParams(max_depth=3, min_samples_leaf=3)
    tree = train(X, y, params)
    oracle = stump_oracle_sse(X, y, 3) / 50
    assert tree.depth <= 3
    assert training_mse(tree, X, y) <= oracle + 1e-12
    stump = train(X, y, TreeParams(max_depth=1, min_samples_leaf=3))
    assert training_mse(stump, X, y) == pytest.approx(oracle, rel=1e-9)


def test_leaf_values_are_means_and_rows_reach_one_leaf():
    rng = np.random.default_rng(3)
    X = rng.integers(0, 4, (40, 3)).astype(float)
    y = rng.random(40)
    tree = train(X, y, TreeParams(max_depth=4, min_samples_leaf=2))
    leaves = tree.apply(X)
    assert (tree.feature[leaves] < 0).all()
    for leaf in np.unique(leaves):
        assert tree.value[leaf] == pytest.approx(y[leaves == leaf].mean(), rel=1e-12)
        assert (leaves == leaf).sum() >= 2


def test_separable_dataset_reproduced_exactly():
    rng = np.random.default_rng(9)
    X = rng.integers(0, 6, (60, 4)).astype(float)
    y = np.round(rng.random(6) * 100, 2)[X[:, 1].astype(int)]
    tree = train(X, y, TreeParams(max_depth=None, min_samples_leaf=1))
    np.testing.assert_array_equal(tree.predict(X), y)


def test_training_is_deterministic():
    rng = np.random.default_rng(4)
    X, y = rng.random((30, 4)), rng.random(30)
    assert train(X, y, seed=1).to_dict() == train(X, y, seed=1).to_dict()


def test_round_trip_dict():
    rng = np.random.default_rng(5)
    X, y = rng.random((30, 4)), rng.random(30)
    tree = train(X, y)
    back = RegressionTree.from_dict(tree.to_dict())
    np.testing.assert_array_equal(back.predict(X), tree.predict(X))


def test_errors():
    with pytest.raises(EmptyTrainingSet):
        train(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(DimensionMismatch):
        train(np.zeros((3, 2)), np.zeros(4))
    tree = train(np.eye(3), [1.0, 2.0, 3.0])
    with pytest.raises(DimensionMismatch):
        tree.predict(np.zeros(5))
    with pytest.raises(ValidationError):
        TreeParams(max_depth=0)
    with pytest.raises(ValidationError):
        TreeParams(min_samples_leaf=0)


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
def test_compiled_kernels_match_numpy():
    from reshi import _kernels
    rng = np.random.default_rng(11)
    for _ in range(200):
        n, l = rng.integers(2, 40), rng.integers(1, 6)
        X = rng.integers(0, 5, (n, l)).astype(float) if rng.random() < 0.5 else rng.random((n, l))
        y = rng.random(n)
        y = y - y.mean()
        leaf = int(rng.integers(1, 4))
        a = _kernels.best_split(X, y, leaf)
        b = _kernels_py.best_split(X, y, leaf)
        assert a[0] == b[0]
        assert a[2] == b[2]
        if a[0] >= 0:
            assert a[1] == b[1]
    tree = train(rng.random((80, 5)), rng.random(80), TreeParams(max_depth=None, min_samples_leaf=1))
    Xq = rng.random((100, 5))
    args = (tree.feature, tree.threshold, tree.left, tree.right, tree.value)
    np.testing.assert_array_equal(_kernels.predict_batch(*args, Xq), _kernels_py.predict_batch(*args, Xq))


def test_best_split_picks_first_of_equal_gains():
    # both features separate y identically; the lower index wins
    X = np.array(list(itertools.product([0.0, 1.0], repeat=1)) * 3, dtype=float)
    X = np.hstack([X, X])
    y = X[:, 0] * 2 - 1
    f, thr, gain = kernels.best_split(X, y, 1)
    assert (f, thr) == (0, 0.5)
    assert gain > 0
