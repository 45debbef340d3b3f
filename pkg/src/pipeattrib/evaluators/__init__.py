"""Loss functions over configurations.

Three evaluator kinds are available:

``loss-table``
    exact lookup of a precomputed loss by canonical id;
``synthetic``
    a deterministic analytic surface (see :mod:`.synthetic`);
``mini-ml``
    a native three-step pipeline scored by k-fold cross-validated
    cross-entropy.

All evaluators are pure functions of (spec, configuration).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path as FsPath

import numpy as np

from ..config_space import ConfigSpace, Configuration, builtin_space
from .cv import CVSplit, make_cv_splits
from .data import Dataset, load_csv, load_mini150
from .learners import LEARNERS, fit_predict_proba
from .metrics import EPS, cross_entropy
from .synthetic import SyntheticSurface
from .transforms import fit_transform_step, make_transform

__all__ = [
    "EvaluationError",
    "EvalResult",
    "EvaluatorSpec",
    "LossTableEvaluator",
    "SyntheticEvaluator",
    "MiniMLEvaluator",
    "make_evaluator",
    "builtin_evaluator",
    "evaluate",
    "cross_entropy",
    "make_cv_splits",
    "fit_transform_step",
    "fit_predict_proba",
    "CVSplit",
    "Dataset",
    "EPS",
]

KINDS = ("loss-table", "synthetic", "mini-ml")


class EvaluationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EvalResult:
    loss: float
    fold_losses: tuple[float, ...] | None = None


@dataclass
class EvaluatorSpec:
    kind: str
    table: dict | None = None
    table_path: str | None = None
    dataset: str | None = None
    k: int = 5
    seed: int = 0
    noise_std: float = 0.0
    noise_seed: int = 0
    coefficients: dict | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown evaluator kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "loss-table" and self.table is None and self.table_path is None:
            raise ValueError("loss-table evaluator needs 'table' or 'table_path'")
        if self.kind == "mini-ml" and self.k < 2:
            raise ValueError("mini-ml evaluator needs k >= 2")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None) -> "EvaluatorSpec":
        doc = dict(doc)
        for key in ("table_path", "dataset"):
            if doc.get(key) and base_dir is not None and not FsPath(doc[key]).is_absolute():
                doc[key] = str(FsPath(base_dir) / doc[key])
        return cls(**doc)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


class LossTableEvaluator:
    def __init__(self, table: dict[str, float]):
        self.table = {str(k): float(v) for k, v in table.items()}

    def evaluate(self, config: Configuration) -> EvalResult:
        try:
            return EvalResult(self.table[config.canonical_id])
        except KeyError:
            raise EvaluationError(f"canonical id {config.canonical_id!r} missing from loss table") from None

    def __call__(self, config):
        return self.evaluate(config).loss


class SyntheticEvaluator:
    def __init__(self, space: ConfigSpace, coefficients=None, noise_std=0.0, noise_seed=0):
        self.surface = SyntheticSurface(space, coefficients, noise_std, noise_seed)

    def evaluate(self, config: Configuration) -> EvalResult:
        return EvalResult(self.surface(config))

    def __call__(self, config):
        return self.evaluate(config).loss


class MiniMLEvaluator:
    """k-fold cross-validated cross-entropy of a transform chain plus learner.

    Every step but the last is a transform (``raw``, ``polynomial``,
    ``random_projection``, ``standardize``, ``pca``); the last step is a
    learner (``knn``, ``decision_tree``).  The CV split and the random
    projection matrix are both seeded by ``seed``.
    """

    def __init__(self, space: ConfigSpace, dataset: Dataset, k: int = 5, seed: int = 0):
        self.space = space
        self.dataset = dataset
        self.k = k
        self.seed = seed
        self.split = make_cv_splits(dataset, k, seed)

    def _step_values(self, config: Configuration) -> list[tuple[str, dict]]:
        out = []
        for s, a in zip(self.space.steps, config.path.algorithms):
            prefix = f"{s.name}.{a}."
            out.append((a, {hid[len(prefix):]: v for hid, v in config.values if hid.startswith(prefix)}))
        return out

    def fit_pipeline(self, config: Configuration, X, y):
        """Fit every step on (X, y); returns (fitted transforms, fitted learner)."""
        steps = self._step_values(config)
        fitted = []
        Z = np.asarray(X, dtype=float)
        for name, values in steps[:-1]:
            t = make_transform(name, values).fit(Z, seed=self.seed)
            Z = t.transform(Z)
            fitted.append(t)
        name, values = steps[-1]
        if name not in LEARNERS:
            raise EvaluationError(f"last step must be a learner, got {name!r}")
        learner = LEARNERS[name](**values).fit(Z, y, self.dataset.class_count)
        return fitted, learner

    def evaluate(self, config: Configuration) -> EvalResult:
        X, y = self.dataset.features, self.dataset.labels
        losses = []
        for fold, (tr, va) in enumerate(self.split):
            try:
                transforms, learner = self.fit_pipeline(config, X[tr], y[tr])
                Z = X[va]
                for t in transforms:
                    Z = t.transform(Z)
                losses.append(cross_entropy(learner.predict_proba(Z), y[va]))
            except EvaluationError:
                raise
            except Exception as exc:
                raise EvaluationError(f"fold {fold}: {exc}") from exc
        return EvalResult(float(np.mean(losses)), tuple(losses))

    def __call__(self, config):
        return self.evaluate(config).loss


def _load_table(spec: EvaluatorSpec) -> dict:
    if spec.table is not None:
        return spec.table
    if spec.table_path.startswith("builtin:"):
        name = spec.table_path.split(":", 1)[1]
        return json.loads(resources.files("pipeattrib.data").joinpath(f"{name}.json").read_text(encoding="utf-8"))
    with open(spec.table_path, encoding="utf-8") as fh:
        return json.load(fh)


def make_evaluator(spec: EvaluatorSpec, space: ConfigSpace):
    if spec.kind == "loss-table":
        return LossTableEvaluator(_load_table(spec))
    if spec.kind == "synthetic":
        return SyntheticEvaluator(space, spec.coefficients, spec.noise_std, spec.noise_seed)
    dataset = load_mini150() if spec.dataset in (None, "builtin:mini150") else load_csv(spec.dataset)
    return MiniMLEvaluator(space, dataset, spec.k, spec.seed)


BUILTIN_EVALUATORS = {
    "fix6-table": ("fix6", EvaluatorSpec("loss-table", table_path="builtin:fix6_losses")),
    "fig3-synth": ("fig3", EvaluatorSpec("synthetic")),
    "miniml": ("miniml", EvaluatorSpec("mini-ml", dataset="builtin:mini150")),
}


def builtin_evaluator(name: str):
    """(space, spec) for a bundled benchmark: ``fix6-table``, ``fig3-synth``, ``miniml``."""
    try:
        space_name, spec = BUILTIN_EVALUATORS[name]
    except KeyError:
        raise ValueError(f"unknown builtin evaluator {name!r}") from None
    return builtin_space(space_name), EvaluatorSpec(**asdict(spec))


def evaluate(spec, config: Configuration, space: ConfigSpace | None = None) -> float:
    """Loss of ``config`` under ``spec`` (an :class:`EvaluatorSpec` or a built evaluator)."""
    if isinstance(spec, EvaluatorSpec):
        if space is None:
            raise ValueError("building an evaluator from a spec needs the space")
        spec = make_evaluator(spec, space)
    return spec.evaluate(config).loss
