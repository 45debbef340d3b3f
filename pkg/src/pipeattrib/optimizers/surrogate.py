"""Random-forest surrogate and expected improvement.

Each tree is a CART regressor fitted on a bootstrap resample of the trials,
choosing every split among a random subset of ceil(sqrt(width)) features
(more are inspected only while none of the drawn ones can split the node).
Leaves hold the mean loss of their samples.  The forest's predictive mean is
the average of the tree predictions and its variance the population
variance across trees.

Configuration encodings take few distinct values per column, so the tree
builder bins each column by its distinct training values and scores all cut
points of a node from one histogram pass instead of sorting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import ndtr

N_TREES = 10
MIN_SAMPLES_LEAF = 3
MIN_SAMPLES_SPLIT = 3


@njit(cache=True)
def _build_tree(codes, y, idx, wt, nbins, uniq, max_features, min_leaf, min_split, seed, feat, thr, left, right, value):
    # codes is column-major (width, n); wt holds bootstrap multiplicities
    np.random.seed(seed)
    w = codes.shape[0]
    kmax = uniq.shape[1]
    cnt = np.zeros(kmax)
    sm = np.zeros(kmax)
    order = np.arange(w)
    cap = len(feat)
    st_node = np.empty(cap, np.int64)
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    sp = 1
    st_node[0], st_lo[0], st_hi[0] = 0, 0, len(idx)
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node, lo, hi = st_node[sp], st_lo[sp], st_hi[sp]
        count = 0.0
        total = 0.0
        ymin, ymax = np.inf, -np.inf
        for i in range(lo, hi):
            r = idx[i]
            count += wt[r]
            total += wt[r] * y[r]
            ymin = min(ymin, y[r])
            ymax = max(ymax, y[r])
        value[node] = total / count
        feat[node] = -1
        if count < min_split or count < 2 * min_leaf or ymin == ymax:
            continue
        for i in range(w - 1, 0, -1):
            j = np.random.randint(0, i + 1)
            order[i], order[j] = order[j], order[i]
        best_score, best_f, best_b, best_nb = -np.inf, -1, -1, -1
        visited = 0
        for oi in range(w):
            if visited >= max_features and best_f >= 0:
                break
            f = order[oi]
            k = nbins[f]
            cnt[:k] = 0.0
            sm[:k] = 0.0
            col = codes[f]
            for i in range(lo, hi):
                r = idx[i]
                cnt[col[r]] += wt[r]
                sm[col[r]] += wt[r] * y[r]
            # cut between consecutive occupied bins prev | b
            prev = -1
            nl, sl = 0.0, 0.0
            split_here = False
            for b in range(k):
                if cnt[b] == 0:
                    continue
                if prev >= 0:
                    split_here = True
                    nr = count - nl
                    if nl >= min_leaf and nr >= min_leaf:
                        score = sl * sl / nl + (total - sl) * (total - sl) / nr
                        if score > best_score:
                            best_score, best_f, best_b, best_nb = score, f, prev, b
                nl += cnt[b]
                sl += sm[b]
                prev = b
            if split_here:
                visited += 1
        if best_f < 0:
            continue
        col = codes[best_f]
        i, j = lo, hi - 1
        while i <= j:
            if col[idx[i]] <= best_b:
                i += 1
            else:
                idx[i], idx[j] = idx[j], idx[i]
                j -= 1
        feat[node] = best_f
        thr[node] = 0.5 * (uniq[best_f, best_b] + uniq[best_f, best_nb])
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[sp], st_lo[sp], st_hi[sp] = n_nodes + 1, i, hi
        sp += 1
        st_node[sp], st_lo[sp], st_hi[sp] = n_nodes, lo, i
        sp += 1
        n_nodes += 2
    return n_nodes


@njit(cache=True)
def _predict_tree(X, feat, thr, left, right, value):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        node = 0
        while feat[node] >= 0:
            node = left[node] if X[r, feat[node]] <= thr[node] else right[node]
        out[r] = value[node]
    return out


@dataclass(frozen=True, eq=False)
class RegressionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _predict_tree(X, self.feature, self.threshold, self.left, self.right, self.value)


@dataclass(frozen=True, eq=False)
class SurrogateModel:
    trees: tuple[RegressionTree, ...]
    width: int
    n_trials: int


def _bin_columns(X):
    n, w = X.shape
    codes = np.empty((w, n), dtype=np.int64)
    uniqs = []
    for f in range(w):
        u, inv = np.unique(X[:, f], return_inverse=True)
        codes[f] = inv
        uniqs.append(u)
    nbins = np.array([len(u) for u in uniqs], dtype=np.int64)
    table = np.zeros((w, max(1, int(nbins.max()))))
    for f, u in enumerate(uniqs):
        table[f, : len(u)] = u
    return codes, nbins, table


def fit_regression_tree(X, y, rows, max_features, seed, min_samples_leaf=MIN_SAMPLES_LEAF, min_samples_split=MIN_SAMPLES_SPLIT, _binned=None):
    """Fit one tree on ``X[rows], y[rows]`` (``rows`` may repeat)."""
    X = np.asarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=np.float64)
    codes, nbins, table = _binned if _binned is not None else _bin_columns(X)
    wt = np.bincount(np.asarray(rows, dtype=np.int64), minlength=len(y)).astype(np.float64)
    idx = np.flatnonzero(wt)
    cap = 2 * len(idx) + 1
    feat = np.empty(cap, np.int64)
    thr = np.zeros(cap)
    left = np.zeros(cap, np.int64)
    right = np.zeros(cap, np.int64)
    value = np.zeros(cap)
    n = _build_tree(codes, y, idx, wt, nbins, table, max_features, min_samples_leaf, min_samples_split, seed, feat, thr, left, right, value)
    return RegressionTree(feat[:n].copy(), thr[:n].copy(), left[:n].copy(), right[:n].copy(), value[:n].copy())


def fit_surrogate(X, y, seed: int = 0, n_trees: int = N_TREES, min_samples_leaf: int = MIN_SAMPLES_LEAF) -> SurrogateModel:
    """Fit a bagged forest of regression trees on encoded trials.

    Parameters
    ----------
    X : array, shape (n, width)
        Encoded configurations.
    y : array, shape (n,)
        Their losses.
    seed : int
        Drives the bootstrap resamples and the per-split feature draws.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be n x width and y length n")
    if len(y) < 2:
        raise ValueError("need at least 2 trials to fit the surrogate")
    if n_trees < 1:
        raise ValueError("need at least one tree")
    rng = np.random.default_rng(seed)
    width = X.shape[1]
    max_features = math.ceil(math.sqrt(width))
    binned = _bin_columns(X)
    trees = []
    for _ in range(n_trees):
        rows = rng.integers(len(y), size=len(y))
        trees.append(
            fit_regression_tree(X, y, rows, max_features, int(rng.integers(2**31 - 1)), min_samples_leaf, _binned=binned)
        )
    return SurrogateModel(tuple(trees), width, len(y))


def predict_surrogate(model: SurrogateModel, X) -> tuple[np.ndarray, np.ndarray]:
    """(mean, variance) per row of ``X``; a single vector gives 1-element arrays."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.width:
        raise ValueError(f"encoding width {X.shape[1]} does not match model width {model.width}")
    preds = np.stack([t.predict(X) for t in model.trees])
    mean, var = preds.mean(axis=0), preds.var(axis=0)
    # unanimous trees: drop the rounding residue of the mean
    same = np.ptp(preds, axis=0) == 0
    mean[same] = preds[0, same]
    var[same] = 0.0
    return mean, var


def expected_improvement(mean, variance, best):
    """EI for minimisation: E[max(best - f, 0)] with f ~ N(mean, variance)."""
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise ValueError("variance must be non-negative")
    sigma = np.sqrt(variance)
    gap = best - mean
    safe = np.where(sigma > 0, sigma, 1.0)
    z = np.where(sigma > 0, gap / safe, 0.0)
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    ei = np.where(sigma > 0, gap * ndtr(z) + sigma * pdf, np.maximum(gap, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei
