"""Datasets and the MINI-150 fixture generator.

MINI-150 is three Gaussian blobs (50 samples each, 4 features, identity
covariance) drawn from xoshiro256** seeded through splitmix64, with standard
normals produced by Box-Muller.  The generator is pure integer arithmetic so
the shipped CSV can be regenerated bit for bit anywhere.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

_MASK = (1 << 64) - 1

MINI150_MEANS = ((0.0, 0.0, 0.0, 0.0), (2.5, 2.5, 0.0, 0.0), (0.0, 0.0, 2.5, 2.5))
MINI150_PER_CLASS = 50
MINI150_SEED = 42


class DatasetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        X, y = self.features, self.labels
        if X.ndim != 2 or y.ndim != 1 or len(X) != len(y):
            raise DatasetError("features must be N x d and labels length N")
        if not np.all(np.isfinite(X)):
            raise DatasetError("features contain missing or non-finite values")
        C = self.class_count
        if C < 2 or len(y) < C:
            raise DatasetError(f"need N >= C >= 2, got N={len(y)}, C={C}")
        if y.min() < 0 or y.max() >= C:
            raise DatasetError("labels out of range")
        if len(np.unique(y)) != C:
            raise DatasetError("every class must be present")

    @property
    def n_samples(self) -> int:
        return len(self.labels)


def _splitmix64(state: int):
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        yield z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256:
    """xoshiro256** with splitmix64 seeding."""

    def __init__(self, seed: int):
        sm = _splitmix64(seed & _MASK)
        self.s = [next(sm) for _ in range(4)]

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        """Double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def normal_pair(self) -> tuple[float, float]:
        u1 = 1.0 - self.uniform()  # (0, 1]
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        return r * math.cos(2.0 * math.pi * u2), r * math.sin(2.0 * math.pi * u2)


def generate_mini150(seed: int = MINI150_SEED) -> Dataset:
    rng = Xoshiro256(seed)
    rows, labels = [], []
    for label, mean in enumerate(MINI150_MEANS):
        for _ in range(MINI150_PER_CLASS):
            z = [*rng.normal_pair(), *rng.normal_pair()]
            rows.append([m + v for m, v in zip(mean, z)])
            labels.append(label)
    return Dataset(np.array(rows), np.array(labels, dtype=np.int64), len(MINI150_MEANS))


def dataset_to_csv(dataset: Dataset) -> str:
    buf = io.StringIO()
    for row, label in zip(dataset.features, dataset.labels):
        buf.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")
    return buf.getvalue()


def parse_csv(text: str) -> Dataset:
    """Headerless CSV: feature columns, then an integer label column."""
    rows, labels = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            rows.append([float(p) for p in parts[:-1]])
            labels.append(int(parts[-1]))
        except ValueError:
            raise DatasetError(f"line {lineno}: cannot parse {line!r}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise DatasetError("ragged or empty CSV")
    y = np.array(labels, dtype=np.int64)
    return Dataset(np.array(rows), y, int(y.max()) + 1)


def load_csv(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_csv(fh.read())


def load_mini150() -> Dataset:
    text = resources.files("pipeattrib.data").joinpath("mini150.csv").read_text(encoding="utf-8")
    return parse_csv(text)
