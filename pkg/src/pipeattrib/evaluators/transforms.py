"""Feature steps of the mini-ML pipeline.

Every transform learns its statistics in ``fit`` from training rows only and
applies them unchanged in ``transform``.
"""
from __future__ import annotations

from itertools import combinations_with_replacement

import numpy as np

VARIANCE_FLOOR = 1e-12


def jacobi_eigh(A, tol: float = 1e-10, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues in descending order and the matching eigenvectors as
    columns.  Each eigenvector's largest-magnitude entry is made positive
    (first such entry on ties) so the result is platform independent.
    Sweeps stop once the off-diagonal Frobenius norm is below
    ``tol * max(1, ||A||_F)``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T, atol=1e-12 * max(1.0, np.abs(A).max(initial=0))):
        raise ValueError("jacobi_eigh needs a square symmetric matrix")
    A = (A + A.T) / 2
    V = np.eye(n)
    threshold = tol * max(1.0, np.linalg.norm(A))
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.triu(A, 1) ** 2))
        if off < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                h = A[q, q] - A[p, p]
                if abs(h) + 100.0 * abs(apq) == abs(h):
                    # apq negligible next to the gap: tan of the angle ~ apq / h
                    t = apq / h
                else:
                    theta = 0.5 * h / apq
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    w, V = w[order], V[:, order]
    for j in range(n):
        i = int(np.argmax(np.abs(V[:, j])))
        if V[i, j] < 0:
            V[:, j] = -V[:, j]
    return w, V


class Raw:
    def fit(self, X, seed=0):
        return self

    def transform(self, X):
        return np.asarray(X, dtype=float)


class Polynomial:
    """All monomials of total degree 1..degree (no bias column)."""

    def __init__(self, degree=2):
        if degree < 1:
            raise ValueError("degree must be >= 1")
        self.degree = degree

    def fit(self, X, seed=0):
        d = np.asarray(X).shape[1]
        self.terms_ = [t for deg in range(1, self.degree + 1) for t in combinations_with_replacement(range(d), deg)]
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        if self.degree == 1:
            return X.copy()
        return np.column_stack([np.prod(X[:, list(t)], axis=1) for t in self.terms_])


class RandomProjection:
    """Gaussian random projection to ``dim`` columns, entries N(0, 1/dim)."""

    def __init__(self, dim=2):
        self.dim = dim

    def fit(self, X, seed=0):
        d = np.asarray(X).shape[1]
        rng = np.random.default_rng(seed)
        self.matrix_ = rng.standard_normal((d, self.dim)) / np.sqrt(self.dim)
        return self

    def transform(self, X):
        return np.asarray(X, dtype=float) @ self.matrix_


class Standardize:
    def fit(self, X, seed=0):
        X = np.asarray(X, dtype=float)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.degenerate_ = bool(np.any(std**2 < VARIANCE_FLOOR))
        self.scale_ = np.sqrt(np.maximum(std**2, VARIANCE_FLOOR))
        return self

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean_) / self.scale_


class PCA:
    """Projection on the leading covariance eigenvectors, optionally whitened.

    ``n_components`` is capped at the input width.  Whitening divides by the
    square root of each eigenvalue, floored at 1e-12; ``degenerate_`` flags
    when the floor was hit.
    """

    def __init__(self, whiten=False, n_components=2):
        self.whiten = whiten
        self.n_components = n_components

    def fit(self, X, seed=0):
        X = np.asarray(X, dtype=float)
        self.mean_ = X.mean(axis=0)
        Xc = X - self.mean_
        cov = Xc.T @ Xc / len(X)
        w, V = jacobi_eigh(cov)
        n = min(X.shape[1], self.n_components)
        self.components_ = V[:, :n]
        self.explained_variance_ = w[:n]
        self.degenerate_ = bool(self.whiten and np.any(w[:n] < VARIANCE_FLOOR))
        self.scale_ = np.sqrt(np.maximum(w[:n], VARIANCE_FLOOR)) if self.whiten else np.ones(n)
        return self

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean_) @ self.components_ / self.scale_


TRANSFORMS = {
    "raw": Raw,
    "polynomial": Polynomial,
    "random_projection": RandomProjection,
    "standardize": Standardize,
    "pca": PCA,
}


def make_transform(algorithm: str, values: dict | None = None):
    try:
        cls = TRANSFORMS[algorithm]
    except KeyError:
        raise ValueError(f"unknown transform {algorithm!r}") from None
    return cls(**(values or {}))


def fit_transform_step(algorithm: str, values: dict | None, train, apply, seed: int = 0) -> np.ndarray:
    """Fit ``algorithm`` on ``train`` and return the transformed ``apply`` matrix."""
    return make_transform(algorithm, values).fit(train, seed=seed).transform(apply)
