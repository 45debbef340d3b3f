"""Grid, random and SMBO search over a scoped configuration set.

Every evaluation is committed to a :class:`~pipeattrib.trial_store.TrialStore`
under the run's id, in draw order.  A run never evaluates the same
configuration twice, so any optimizer given a budget at least the scope size
(and no patience limit) visits every configuration.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..config_space import ConfigSpace, Scope, ScopeIndex, encode
from ..trial_store import FAILED, OK, Trial, TrialStore
from .surrogate import (
    N_TREES,
    SurrogateModel,
    expected_improvement,
    fit_surrogate,
    predict_surrogate,
)

__all__ = [
    "RunSpec",
    "RunResult",
    "grid_search",
    "random_search",
    "smbo_search",
    "run",
    "SurrogateModel",
    "fit_surrogate",
    "predict_surrogate",
    "expected_improvement",
]

OPTIMIZERS = ("grid", "random", "smbo")
MODES = ("cash", "hpo")
EXHAUSTED = "exhausted-space"
BUDGET = "budget"
PATIENCE = "patience"
MAX_COLLISIONS = 100
# scopes up to this size get all encodings computed once per SMBO run
PRECOMPUTE_LIMIT = 100_000


@dataclass
class RunSpec:
    """One optimizer run.

    ``patience`` counts consecutive evaluations without strict improvement
    of the incumbent; ``None`` disables it.  ``budget=None`` means the scope
    size.  The SMBO constants are SMAC-style defaults.
    """

    optimizer: str
    mode: str = "cash"
    path: str | None = None
    budget: int | None = None
    patience: int | None = 50
    seed: int = 0
    run_id: str | None = None
    n_init: int = 10
    pool_size: int = 500
    random_every: int = 4
    n_trees: int = N_TREES
    workers: int = 1

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "hpo" and not self.path:
            raise ValueError("hpo mode needs a path")
        if self.budget is not None and self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.run_id is None:
            where = self.mode if self.mode == "cash" else f"hpo[{self.path}]"
            self.run_id = f"{self.optimizer}:{where}:{self.seed}"

    def scope(self, space: ConfigSpace) -> Scope:
        return Scope() if self.mode == "cash" else Scope.on_path(space, self.path)


@dataclass
class RunResult:
    run_id: str
    best: Trial | None
    n_trials: int
    stop_reason: str
    elapsed_s: float = 0.0
    best_history: list[float] = field(default_factory=list)

    @property
    def best_loss(self) -> float:
        return self.best.loss if self.best is not None else math.inf


class _Driver:
    """Shared bookkeeping: dedup, commit order, incumbent and stopping."""

    def __init__(self, space, scope, evaluator, store: TrialStore, spec: RunSpec):
        self.space = space
        self.index = scope if isinstance(scope, ScopeIndex) else ScopeIndex(space, scope)
        if self.index.size == 0:
            raise ValueError("empty scope")
        self.evaluator = evaluator
        self.store = store
        self.spec = spec
        self.budget = spec.budget if spec.budget is not None else self.index.size
        self.seen: set[int] = set()
        self.best: Trial | None = None
        self.since_improve = 0
        self.n = 0
        self.history: list[float] = []
        # ok trials inside the scope, as (rank, loss), for the surrogate
        self.ok_ranks: list[int] = []
        self.ok_losses: list[float] = []
        self.t0 = time.perf_counter()
        # resume: trials of this run already in the store count as seen
        for t in store.run_trials(spec.run_id):
            cfg = space.configuration(t.config_id)
            rank = self.index.rank(cfg) if self.index.contains(cfg) else None
            if rank is not None:
                self.seen.add(rank)
            self._account(t, rank)

    def _account(self, t: Trial, rank: int | None) -> None:
        self.n += 1
        if t.ok and rank is not None:
            self.ok_ranks.append(rank)
            self.ok_losses.append(t.loss)
        if t.ok and (self.best is None or t.loss < self.best.loss):
            self.best = t
            self.since_improve = 0
        else:
            self.since_improve += 1
        self.history.append(self.best.loss if self.best is not None else math.inf)

    def stop_reason(self) -> str | None:
        if len(self.seen) >= self.index.size:
            return EXHAUSTED
        if self.n >= self.budget:
            return BUDGET
        if self.spec.patience is not None and self.spec.optimizer != "grid" and self.since_improve >= self.spec.patience:
            return PATIENCE
        return None

    def _evaluate(self, rank: int):
        config = self.index.unrank(rank)
        start = time.perf_counter()
        try:
            res = self.evaluator.evaluate(config)
            out = (config, res.loss, res.fold_losses, None)
        except Exception as exc:  # recorded as a failed trial; the run goes on
            out = (config, None, None, exc)
        return out + ((time.perf_counter() - start) * 1000.0,)

    def commit(self, rank: int, outcome) -> Trial:
        config, loss, folds, exc, ms = outcome
        if loss is not None and not math.isfinite(loss):
            loss, exc = None, ValueError("non-finite loss")
        trial = Trial(
            run_id=self.spec.run_id,
            draw_index=self.n,
            config_id=config.canonical_id,
            path_id=config.path.id,
            loss=None if exc is not None else float(loss),
            status=FAILED if exc is not None else OK,
            optimizer=self.spec.optimizer,
            mode=self.spec.mode,
            seed=self.spec.seed,
            fold_losses=tuple(float(f) for f in folds) if folds is not None and exc is None else None,
            elapsed_ms=round(ms, 3),
        )
        self.seen.add(rank)
        self.store.record(trial)
        self._account(trial, rank)
        return trial

    def run_ranks(self, ranks) -> str | None:
        """Evaluate ``ranks`` in order (in parallel when workers > 1); stop early if needed."""
        ranks = list(ranks)
        if self.spec.workers > 1 and len(ranks) > 1:
            with ThreadPoolExecutor(self.spec.workers) as pool:
                for start in range(0, len(ranks), self.spec.workers):
                    chunk = ranks[start : start + self.spec.workers]
                    for rank, outcome in zip(chunk, pool.map(self._evaluate, chunk)):
                        self.commit(rank, outcome)
                        reason = self.stop_reason()
                        if reason:
                            return reason
            return self.stop_reason()
        for rank in ranks:
            self.commit(rank, self._evaluate(rank))
            reason = self.stop_reason()
            if reason:
                return reason
        return self.stop_reason()

    def result(self, reason: str) -> RunResult:
        return RunResult(self.spec.run_id, self.best, self.n, reason, time.perf_counter() - self.t0, self.history)


class _UnseenSampler:
    """Uniform draws of not-yet-evaluated ranks.

    Redraws on collision; after ``MAX_COLLISIONS`` consecutive collisions the
    unseen remainder is enumerated in a shuffled order instead.
    """

    def __init__(self, driver: _Driver, rng: np.random.Generator):
        self.d = driver
        self.rng = rng
        self.queue: list[int] | None = None
        self.pending: set[int] = set()

    def next(self) -> int | None:
        d = self.d
        if len(d.seen) + len(self.pending) >= d.index.size:
            return None
        if self.queue is None:
            collisions = 0
            while collisions < MAX_COLLISIONS:
                r = int(self.rng.integers(d.index.size))
                if r not in d.seen and r not in self.pending:
                    self.pending.add(r)
                    return r
                collisions += 1
            taken = d.seen | self.pending
            rest = np.setdiff1d(np.arange(d.index.size), np.fromiter(taken, dtype=np.int64, count=len(taken)))
            self.queue = list(self.rng.permutation(rest))[::-1]
        while self.queue:
            r = int(self.queue.pop())
            if r not in d.seen and r not in self.pending:
                self.pending.add(r)
                return r
        return None

    def done(self, rank: int) -> None:
        self.pending.discard(rank)


def grid_search(space: ConfigSpace, scope, evaluator, store: TrialStore, run_spec: RunSpec) -> RunResult:
    """Evaluate every scoped configuration once, in enumeration order.

    Patience is ignored; a budget smaller than the scope truncates the sweep.
    """
    d = _Driver(space, scope, evaluator, store, run_spec)
    reason = d.stop_reason()
    if reason is None:
        todo = (r for r in range(d.index.size) if r not in d.seen)
        reason = d.run_ranks(todo)
    return d.result(reason or EXHAUSTED)


def random_search(space: ConfigSpace, scope, evaluator, store: TrialStore, run_spec: RunSpec) -> RunResult:
    d = _Driver(space, scope, evaluator, store, run_spec)
    sampler = _UnseenSampler(d, np.random.default_rng(run_spec.seed))
    reason = d.stop_reason()
    while reason is None:
        batch = []
        for _ in range(run_spec.workers):
            r = sampler.next()
            if r is None:
                break
            batch.append(r)
        if not batch:
            reason = EXHAUSTED
            break
        reason = d.run_ranks(batch)
        for r in batch:
            sampler.done(r)
    return d.result(reason)


def smbo_search(space: ConfigSpace, scope, evaluator, store: TrialStore, run_spec: RunSpec) -> RunResult:
    """SMAC-style loop: random forest surrogate, expected improvement.

    ``n_init`` random unseen trials seed the model.  Afterwards every
    ``random_every``-th proposal is a random unseen configuration; the others
    maximise EI over a pool of up to ``pool_size`` unseen configurations
    (ties to the smallest canonical id).  Always sequential.
    """
    if run_spec.workers > 1:
        raise ValueError("smbo runs sequentially; workers must be 1")
    d = _Driver(space, scope, evaluator, store, run_spec)
    rng = np.random.default_rng(run_spec.seed)
    sampler = _UnseenSampler(d, rng)
    enc_cache: dict[int, np.ndarray] = {}
    table = None
    if d.index.size <= PRECOMPUTE_LIMIT:
        table = np.array([encode(space, c) for c in d.index]).reshape(d.index.size, space.encoding_width)

    def encoded(ranks):
        if table is not None:
            return table[np.asarray(ranks, dtype=np.int64)]
        out = np.empty((len(ranks), space.encoding_width))
        for i, r in enumerate(ranks):
            v = enc_cache.get(r)
            if v is None:
                v = enc_cache[r] = encode(space, d.index.unrank(r))
            out[i] = v
        return out

    def step(rank):
        reason = d.run_ranks([rank])
        sampler.done(rank)
        return reason

    reason = d.stop_reason()
    n_init = min(run_spec.n_init, d.index.size)
    while reason is None and d.n < n_init:
        r = sampler.next()
        if r is None:
            reason = EXHAUSTED
            break
        reason = step(r)

    proposal = 0
    while reason is None:
        use_random = run_spec.random_every > 0 and proposal % run_spec.random_every == run_spec.random_every - 1
        proposal += 1
        if use_random or len(d.ok_ranks) < 2:
            r = sampler.next()
        else:
            model = fit_surrogate(
                encoded(d.ok_ranks), d.ok_losses, seed=int(rng.integers(2**31 - 1)), n_trees=run_spec.n_trees
            )
            pool = _candidate_pool(d, rng, run_spec.pool_size)
            if len(pool) == 0:
                r = None
            else:
                mean, var = predict_surrogate(model, encoded(pool))
                ei = expected_improvement(mean, var, d.best.loss)
                top = np.flatnonzero(ei == ei.max())
                r = int(pool[top[0]]) if len(top) == 1 else min(
                    (int(pool[i]) for i in top), key=lambda k: d.index.unrank(k).canonical_id
                )
                sampler.pending.add(r)
        if r is None:
            reason = EXHAUSTED
            break
        reason = step(r)
    return d.result(reason)


def _candidate_pool(d: _Driver, rng: np.random.Generator, size: int) -> np.ndarray:
    n = d.index.size
    remaining = n - len(d.seen)
    if remaining <= size or n <= 4 * size + len(d.seen):
        mask = np.ones(n, dtype=bool)
        mask[np.fromiter(d.seen, dtype=np.int64, count=len(d.seen))] = False
        unseen = np.flatnonzero(mask)
        if len(unseen) <= size:
            return unseen
        return np.sort(rng.choice(unseen, size, replace=False))
    picked: set[int] = set()
    while len(picked) < size:
        r = int(rng.integers(n))
        if r not in d.seen:
            picked.add(r)
    return np.array(sorted(picked), dtype=np.int64)


_DISPATCH = {"grid": grid_search, "random": random_search, "smbo": smbo_search}


def run(space: ConfigSpace, evaluator, store: TrialStore, run_spec: RunSpec, scope: Scope | None = None) -> RunResult:
    """Run ``run_spec.optimizer`` on its mode's scope (or an explicit ``scope``)."""
    scope = run_spec.scope(space) if scope is None else scope
    return _DISPATCH[run_spec.optimizer](space, scope, evaluator, store, run_spec)
