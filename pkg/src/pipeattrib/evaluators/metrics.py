from __future__ import annotations

import numpy as np

EPS = 1e-12


def cross_entropy(probabilities, labels, eps: float = EPS) -> float:
    """Mean negative log-probability of the true class.

    Probabilities are clipped to ``[eps, 1 - eps]`` so the loss is always
    finite; the worst case is ``-log(eps)``.
    """
    P = np.asarray(probabilities, dtype=float)
    y = np.asarray(labels)
    if P.ndim != 2 or y.ndim != 1 or len(P) != len(y):
        raise ValueError(f"shape mismatch: probabilities {P.shape}, labels {y.shape}")
    if len(y) == 0:
        raise ValueError("no samples")
    if np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("probability rows must sum to 1")
    if y.min() < 0 or y.max() >= P.shape[1]:
        raise ValueError("label outside probability columns")
    p_true = np.clip(P[np.arange(len(y)), y], eps, 1.0 - eps)
    return float(-np.mean(np.log(p_true)))
