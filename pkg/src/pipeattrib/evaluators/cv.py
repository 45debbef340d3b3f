from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset


@dataclass(frozen=True, eq=False)
class CVSplit:
    folds: np.ndarray
    k: int
    seed: int

    def train_valid(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays (train, validation) for one fold."""
        mask = self.folds == fold
        return np.flatnonzero(~mask), np.flatnonzero(mask)

    def __iter__(self):
        for i in range(self.k):
            yield self.train_valid(i)


def make_cv_splits(dataset: Dataset, k: int = 5, seed: int = 0) -> CVSplit:
    """Stratified k-fold assignment.

    Each class is shuffled and dealt round-robin across folds, continuing the
    deal where the previous class stopped so fold sizes also stay balanced.
    """
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    counts = np.bincount(dataset.labels, minlength=dataset.class_count)
    if k > counts.min():
        raise ValueError(f"k={k} exceeds the smallest class size {counts.min()}")
    rng = np.random.default_rng(seed)
    folds = np.empty(dataset.n_samples, dtype=np.int64)
    start = 0
    for c in range(dataset.class_count):
        members = rng.permutation(np.flatnonzero(dataset.labels == c))
        folds[members] = (start + np.arange(len(members))) % k
        start = (start + len(members)) % k
    return CVSplit(folds, k, seed)
