"""Error contributions of pipeline steps, algorithms and hyperparameters.

The error contribution of a component is the average, over its choices, of
the best loss reachable with that choice fixed, minus the best loss
reachable with it free:

* step ``S``: choices are the step's algorithms, searched over the whole
  space;
* algorithm ``A`` on a path: choices are the configurations of ``A``'s
  hyperparameters, searched over the path;
* hyperparameter ``h`` on a path: choices are the values of ``h``, searched
  over the path.

``filter`` mode reads the constrained minima off existing trials.  ``reopt``
mode runs a dedicated constrained search per choice and takes the reference
minimum over the unconstrained run and all constrained runs.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .config_space import ConfigSpace, Path, Scope, ScopeError, format_value, parse_path
from .trial_store import InsufficientCoverage, TrialStore

__all__ = [
    "ECEstimate",
    "ECRow",
    "ECReport",
    "ec_step",
    "ec_algorithm",
    "ec_hyperparameter",
    "ec_level",
    "attribute_runs",
    "aggregate",
    "LEVELS",
    "MODES",
]

LEVELS = ("step", "algorithm", "hyperparameter")
MODES = ("filter", "reopt")
CSV_COLUMNS = ("level", "target", "path", "optimizer", "mode", "mean", "std", "reference_min", "run_count")


@dataclass(frozen=True)
class ECEstimate:
    """One error contribution from one run set.

    ``constrained_minima`` pairs each choice label with the best loss found
    under that choice; ``value`` is their mean minus ``reference_min``.
    """

    level: str
    target: str
    path: str | None
    value: float
    constrained_minima: tuple[tuple[str, float], ...]
    reference_min: float
    mode: str
    runs: tuple[str, ...] = ()
    optimizer: str = ""


def _runs_tuple(runs) -> tuple[str, ...] | None:
    return None if runs is None else tuple(sorted(runs))


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"unknown attribution mode {mode!r}; expected one of {MODES}")


def _optimizer_of(store: TrialStore, runs) -> str:
    names = {t.optimizer for t in store.select(runs, ok_only=False)}
    return names.pop() if len(names) == 1 else ""


def _estimate(store, space, level, target, path, base_scope, choices, runs, mode, evaluator, run_spec):
    """Shared core: ``choices`` is a list of (label, constrained scope)."""
    _check_mode(mode)
    if mode == "filter":
        reference, _ = store.min_over(space, base_scope, runs)
        minima = []
        for label, scope in choices:
            try:
                minima.append((label, store.min_over(space, scope, runs)[0]))
            except InsufficientCoverage as exc:
                raise InsufficientCoverage(f"{target}: {label} ({exc.predicate})", runs) from None
        used = _runs_tuple(runs) or tuple(sorted(store.runs))
        optimizer = _optimizer_of(store, runs)
    else:
        if evaluator is None or run_spec is None:
            raise ValueError("reopt mode needs an evaluator and a run spec template")
        from .optimizers import run as run_optimizer

        base_spec = run_spec
        if not store.run_trials(base_spec.run_id):
            run_optimizer(space, evaluator, store, base_spec, scope=base_scope)
        reference, _ = store.min_over(space, base_scope, [base_spec.run_id])
        used = [base_spec.run_id]
        minima = []
        for label, scope in choices:
            spec = replace(base_spec, run_id=f"{base_spec.run_id}|{level}:{target}={label}")
            run_optimizer(space, evaluator, store, spec, scope=scope)
            used.append(spec.run_id)
            minima.append((label, store.min_over(space, scope, [spec.run_id])[0]))
        # constrained runs may beat the unconstrained one
        reference = min([reference] + [m for _, m in minima])
        used = tuple(used)
        optimizer = base_spec.optimizer
    value = float(np.mean([m for _, m in minima])) - reference
    return ECEstimate(level, target, path, value, tuple(minima), reference, mode, used, optimizer)


def ec_step(
    store: TrialStore,
    space: ConfigSpace,
    step: str,
    runs: Iterable[str] | None = None,
    mode: str = "filter",
    evaluator=None,
    run_spec=None,
) -> ECEstimate:
    """Contribution of the choice of algorithm in ``step`` (whole-space search)."""
    s = space.step(step)
    choices = [(a.name, Scope.with_algorithm(s.name, a.name)) for a in s.algorithms]
    return _estimate(store, space, "step", s.name, None, Scope(), choices, runs, mode, evaluator, run_spec)


def _path_and_step(space: ConfigSpace, path, algorithm: str) -> tuple[Path, str]:
    path = parse_path(space, path)
    for s, a in zip(space.steps, path.algorithms):
        if algorithm in (a, s.name):
            return path, s.name
    raise ScopeError(f"algorithm {algorithm!r} is not on path {path.id!r}")


def ec_algorithm(
    store: TrialStore,
    space: ConfigSpace,
    path,
    algorithm: str,
    runs: Iterable[str] | None = None,
    mode: str = "filter",
    evaluator=None,
    run_spec=None,
) -> ECEstimate:
    """Contribution of ``algorithm``'s hyperparameter configuration on ``path``.

    ``algorithm`` may be given by name or by the name of its step.
    """
    path, sname = _path_and_step(space, path, algorithm)
    aname = path.algorithms[space.step_index(sname)]
    spec = space.step(sname).algorithm(aname)
    base = Scope.on_path(space, path)
    ids = [f"{sname}.{aname}.{h.name}" for h in spec.hyperparameters]
    choices = []
    for combo in product(*(h.values for h in spec.hyperparameters)):
        label = ",".join(f"{h.name}={format_value(v)}" for h, v in zip(spec.hyperparameters, combo)) or "()"
        choices.append((label, base.constrain(values=zip(ids, combo))))
    return _estimate(store, space, "algorithm", aname, path.id, base, choices, runs, mode, evaluator, run_spec)


def ec_hyperparameter(
    store: TrialStore,
    space: ConfigSpace,
    path,
    hyperparameter: str,
    runs: Iterable[str] | None = None,
    mode: str = "filter",
    evaluator=None,
    run_spec=None,
) -> ECEstimate:
    """Contribution of one hyperparameter's value on ``path``.

    ``hyperparameter`` is a full ``step.algorithm.name`` id or an
    unambiguous bare name.
    """
    path = parse_path(space, path)
    sname, aname, h = space.resolve_hyperparameter(hyperparameter)
    if path.algorithms[space.step_index(sname)] != aname:
        raise ScopeError(f"{sname}.{aname}.{h.name} is not active on path {path.id!r}")
    hid = f"{sname}.{aname}.{h.name}"
    base = Scope.on_path(space, path)
    choices = [(format_value(v), base.constrain(values=[(hid, v)])) for v in h.values]
    return _estimate(store, space, "hyperparameter", hid, path.id, base, choices, runs, mode, evaluator, run_spec)


def level_targets(space: ConfigSpace, level: str, path=None) -> list[str]:
    """Targets of a level in declaration order."""
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}; expected one of {LEVELS}")
    if level == "step":
        return [s.name for s in space.steps]
    if path is None:
        raise ValueError(f"level {level!r} needs a path")
    path = parse_path(space, path)
    if level == "algorithm":
        return list(path.algorithms)
    return [
        f"{s.name}.{a.name}.{h.name}" for s, a in zip(space.steps, space.algorithms_of(path)) for h in a.hyperparameters
    ]


def ec_level(
    store: TrialStore,
    space: ConfigSpace,
    level: str,
    path=None,
    runs: Iterable[str] | None = None,
    mode: str = "filter",
    evaluator=None,
    run_spec=None,
) -> list[ECEstimate]:
    """Estimates for every target of ``level`` (one per step, algorithm or hyperparameter)."""
    runs = None if runs is None else list(runs)
    out = []
    for target in level_targets(space, level, path):
        if level == "step":
            out.append(ec_step(store, space, target, runs, mode, evaluator, run_spec))
        elif level == "algorithm":
            out.append(ec_algorithm(store, space, path, target, runs, mode, evaluator, run_spec))
        else:
            out.append(ec_hyperparameter(store, space, path, target, runs, mode, evaluator, run_spec))
    return out


def _is_constrained_run(run_id: str) -> bool:
    return "|" in run_id


def attribute_runs(store: TrialStore, space: ConfigSpace, level: str, path=None) -> list[ECEstimate]:
    """Filter-mode estimates for every run in ``store``, each run on its own.

    Runs created by reopt mode (ids containing ``|``) are skipped.  A run in
    hpo mode only contributes to path-level attributions on its own path.
    """
    out = []
    for run_id, info in store.runs.items():
        if _is_constrained_run(run_id):
            continue
        if level == "step" and info["mode"] == "hpo":
            continue
        out.extend(ec_level(store, space, level, path, [run_id], "filter"))
    return out


@dataclass(frozen=True)
class ECRow:
    level: str
    target: str
    path: str
    optimizer: str
    mode: str
    mean: float
    std: float
    reference_min: float
    run_count: int


@dataclass
class ECReport:
    rows: list[ECRow]
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(
                [r.level, r.target, r.path, r.optimizer, r.mode, repr(r.mean), repr(r.std), repr(r.reference_min), r.run_count]
            )
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "ECReport":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ValueError(f"EC report header must be {','.join(CSV_COLUMNS)}")
        rows = [
            ECRow(
                d["level"], d["target"], d["path"], d["optimizer"], d["mode"],
                float(d["mean"]), float(d["std"]), float(d["reference_min"]), int(d["run_count"]),
            )
            for d in reader
        ]
        return cls(rows)

    @classmethod
    def read_csv(cls, path) -> "ECReport":
        with open(path, encoding="utf-8") as fh:
            return cls.from_csv(fh.read())

    def value(self, target: str, optimizer: str | None = None) -> ECRow:
        for r in self.rows:
            if r.target == target and (optimizer is None or r.optimizer == optimizer):
                return r
        raise KeyError(target)


def aggregate(estimates: Sequence[ECEstimate], metadata: dict | None = None) -> ECReport:
    """Mean and population std per (optimizer, mode, level, path, target).

    Row order: optimizers in first-seen order, targets in first-seen order
    within each optimizer.
    """
    if not estimates:
        raise ValueError("nothing to aggregate")
    groups: dict[tuple, list[ECEstimate]] = {}
    for e in estimates:
        groups.setdefault((e.optimizer, e.mode, e.level, e.path or "", e.target), []).append(e)
    opt_order = list(dict.fromkeys(e.optimizer for e in estimates))
    rows = []
    for opt in opt_order:
        for (o, mode, level, path, target), group in groups.items():
            if o != opt:
                continue
            values = np.array([e.value for e in group])
            refs = np.array([e.reference_min for e in group])
            rows.append(
                ECRow(level, target, path, opt, mode, float(values.mean()), float(values.std()), float(refs.mean()), len(group))
            )
    return ECReport(rows, dict(metadata or {}))
