"""Pure numpy implementations of the tree kernels.

Must stay bit-for-bit identical to ``_kernels.pyx``: same stable sort,
sequential prefix sums, the same gain expression, first maximum wins.
"""

import numpy as np


def best_split(X, y, min_leaf):
    """Best SSE-reducing split of the rows in ``X``.

    ``y`` should already be centred on the node mean. Returns
    ``(feature, threshold, gain)``; ``feature`` is -1 when no admissible
    split exists.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, l = X.shape
    best_feature, best_threshold, best_gain = -1, np.nan, 0.0
    if n < 2 * min_leaf:
        return best_feature, best_threshold, best_gain
    lo, hi = min_leaf - 1, n - min_leaf  # left sizes k+1 for k in [lo, hi)
    nl = np.arange(1, n, dtype=np.float64)[lo:hi]
    nr = n - nl
    for f in range(l):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        csum = np.cumsum(y[order])
        total = csum[-1]
        sl = csum[lo:hi]
        sr = total - sl
        gain = sl * sl / nl + sr * sr / nr - total * total / n
        valid = xs[lo:hi] < xs[lo + 1:hi + 1]
        if not valid.any():
            continue
        gain = np.where(valid, gain, -np.inf)
        k = int(np.argmax(gain))
        if gain[k] > best_gain:
            best_gain = float(gain[k])
            best_feature = f
            best_threshold = (xs[lo + k] + xs[lo + k + 1]) / 2.0
    return best_feature, best_threshold, best_gain


def predict_batch(feature, threshold, left, right, value, X):
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape[0], dtype=np.float64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            node = left[node] if X[i, feature[node]] <= threshold[node] else right[node]
        out[i] = value[node]
    return out
