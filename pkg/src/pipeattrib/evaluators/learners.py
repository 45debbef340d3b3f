"""Probabilistic learners of the mini-ML pipeline.

Both learners report add-one (Laplace) smoothed class frequencies, so no
predicted probability is ever exactly 0 or 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TIE = 1e-12


class KNN:
    def __init__(self, k=1):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k

    def fit(self, X, y, n_classes):
        X = np.asarray(X, dtype=float)
        if self.k > len(X):
            raise ValueError(f"k={self.k} exceeds training size {len(X)}")
        self.X_, self.y_, self.n_classes_ = X, np.asarray(y), n_classes
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        d2 = ((X[:, None, :] - self.X_[None, :, :]) ** 2).sum(axis=2)
        # stable sort: equidistant neighbours resolved by training order
        nearest = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
        counts = np.zeros((len(X), self.n_classes_))
        np.add.at(counts, (np.repeat(np.arange(len(X)), self.k), self.y_[nearest].ravel()), 1.0)
        return (counts + 1.0) / (self.k + self.n_classes_)


@dataclass
class _Node:
    proba: np.ndarray
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None


def _best_split(X, y, n_classes, min_leaf):
    """Gini-optimal (feature, threshold) or None.

    Candidates are midpoints of consecutive sorted unique values.  Ties go
    to the lowest feature index, then the lowest threshold.
    """
    n = len(y)
    onehot = np.eye(n_classes)[y]
    parent = (onehot.sum(axis=0) ** 2).sum() / n
    best_score, best = parent, None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cum = np.cumsum(onehot[order], axis=0)
        # candidate cut after position i (left = first i+1 samples)
        cut = np.flatnonzero(xs[1:] > xs[:-1])
        if cut.size == 0:
            continue
        n_left = cut + 1
        n_right = n - n_left
        ok = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not ok.any():
            continue
        cut, n_left, n_right = cut[ok], n_left[ok], n_right[ok]
        left = cum[cut]
        right = cum[-1] - left
        # maximising sum(c^2)/n on both sides == minimising weighted Gini
        score = (left**2).sum(axis=1) / n_left + (right**2).sum(axis=1) / n_right
        top = score.max()
        if top > best_score + _TIE:
            i = int(np.flatnonzero(score >= top - _TIE)[0])
            best_score = top
            best = (f, 0.5 * (xs[cut[i]] + xs[cut[i] + 1]))
    return best


class DecisionTree:
    """Greedy Gini classification tree with smoothed leaf frequencies."""

    def __init__(self, max_depth=2, min_samples_leaf=1):
        if max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y, n_classes):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.n_classes_ = n_classes
        self.root_ = self._grow(X, y, 0)
        return self

    def _grow(self, X, y, depth):
        counts = np.bincount(y, minlength=self.n_classes_)
        node = _Node((counts + 1.0) / (len(y) + self.n_classes_))
        if depth >= self.max_depth or len(y) < 2 * self.min_samples_leaf or np.count_nonzero(counts) <= 1:
            return node
        split = _best_split(X, y, self.n_classes_, self.min_samples_leaf)
        if split is None:
            return node
        node.feature, node.threshold = split
        mask = X[:, node.feature] <= node.threshold
        node.left = self._grow(X[mask], y[mask], depth + 1)
        node.right = self._grow(X[~mask], y[~mask], depth + 1)
        return node

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        out = np.empty((len(X), self.n_classes_))
        self._fill(self.root_, X, np.arange(len(X)), out)
        return out

    def _fill(self, node, X, idx, out):
        if node.left is None:
            out[idx] = node.proba
            return
        mask = X[idx, node.feature] <= node.threshold
        self._fill(node.left, X, idx[mask], out)
        self._fill(node.right, X, idx[~mask], out)

    @property
    def depth(self) -> int:
        def walk(node):
            return 0 if node.left is None else 1 + max(walk(node.left), walk(node.right))

        return walk(self.root_)


LEARNERS = {"knn": KNN, "decision_tree": DecisionTree}


def fit_predict_proba(learner: str, values: dict | None, train, test, n_classes: int | None = None) -> np.ndarray:
    """Fit ``learner`` on ``train = (X, y)`` and return class probabilities for ``test``."""
    try:
        cls = LEARNERS[learner]
    except KeyError:
        raise ValueError(f"unknown learner {learner!r}") from None
    X, y = train
    y = np.asarray(y)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    return cls(**(values or {})).fit(X, y, n_classes).predict_proba(test)
