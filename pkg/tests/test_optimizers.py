import numpy as np
import pytest

from pipeattrib.config_space import builtin_space, enumerate_configurations, parse_space
from pipeattrib.evaluators import EvalResult
from pipeattrib.optimizers import (
    BUDGET,
    EXHAUSTED,
    PATIENCE,
    RunSpec,
    grid_search,
    random_search,
    run,
    smbo_search,
)
from pipeattrib.trial_store import TrialStore

FIG3_PATH = "haralick->pca->random_forest"
BEST_FIX6 = "S1=A(a=1)|S2=C(c=2)"


class Table:
    """Evaluator over an explicit {canonical id: loss} dict; missing ids fail."""

    def __init__(self, losses):
        self.losses = losses
        self.calls = []

    def evaluate(self, config):
        self.calls.append(config.canonical_id)
        return EvalResult(self.losses[config.canonical_id])


def best_matches_log(store, result):
    losses = [t.loss for t in store.run_trials(result.run_id) if t.ok]
    return result.best_loss == min(losses)


# spec validation


@pytest.mark.parametrize(
    "kw",
    [
        dict(optimizer="anneal"),
        dict(optimizer="grid", mode="nas"),
        dict(optimizer="grid", mode="hpo"),
        dict(optimizer="grid", budget=0),
        dict(optimizer="random", patience=0),
        dict(optimizer="random", workers=0),
    ],
)
def test_run_spec_rejects(kw):
    with pytest.raises(ValueError):
        RunSpec(**kw)


def test_default_run_ids():
    assert RunSpec("grid").run_id == "grid:cash:0"
    assert RunSpec("smbo", "hpo", "A->C", seed=3).run_id == "smbo:hpo[A->C]:3"


def test_hpo_on_unknown_path(fix6):
    space, ev = fix6
    with pytest.raises(Exception):
        run(space, ev, TrialStore(), RunSpec("grid", "hpo", "B->A"))


# the three optimizers on FIX-6


@pytest.mark.parametrize("optimizer", ["grid", "random", "smbo"])
def test_fix6_full_budget_finds_table_minimum(fix6, optimizer):
    space, ev = fix6
    store = TrialStore()
    res = run(space, ev, store, RunSpec(optimizer, budget=6, seed=4))
    assert res.n_trials == 6 and res.stop_reason == EXHAUSTED
    assert res.best_loss == 0.20 and res.best.config_id == BEST_FIX6
    assert len(store.seen(res.run_id)) == 6
    assert best_matches_log(store, res)


def test_grid_order_and_fig3_path(fig3):
    space, ev = fig3
    store = TrialStore()
    res = grid_search(space, RunSpec("grid", "hpo", FIG3_PATH).scope(space), ev, store, RunSpec("grid", "hpo", FIG3_PATH))
    assert res.n_trials == 120 and res.stop_reason == EXHAUSTED
    assert {t.path_id for t in store} == {FIG3_PATH}


def test_grid_enumeration_order(fix6):
    space, _ = fix6
    ev = Table({c.canonical_id: 0.5 for c in enumerate_configurations(space)})
    run(space, ev, TrialStore(), RunSpec("grid"))
    assert ev.calls == [c.canonical_id for c in enumerate_configurations(space)]


def test_grid_ignores_patience_and_truncates_on_budget(fix6):
    space, ev = fix6
    res = run(space, ev, TrialStore(), RunSpec("grid", patience=1))
    assert res.n_trials == 6
    res = run(space, ev, TrialStore(), RunSpec("grid", budget=4))
    assert (res.n_trials, res.stop_reason) == (4, BUDGET)


@pytest.mark.parametrize("optimizer", ["grid", "random", "smbo"])
def test_one_config_space(optimizer):
    doc = {"name": "one", "steps": [{"name": "S", "algorithms": [{"name": "a"}]}]}
    space = parse_space(doc)
    res = run(space, Table({"S=a()": 0.7}), TrialStore(), RunSpec(optimizer))
    assert (res.n_trials, res.best_loss, res.stop_reason) == (1, 0.7, EXHAUSTED)


@pytest.mark.parametrize("optimizer", ["random", "smbo"])
def test_budget_one(fix6, optimizer):
    space, ev = fix6
    res = run(space, ev, TrialStore(), RunSpec(optimizer, budget=1))
    assert (res.n_trials, res.stop_reason) == (1, BUDGET)


def test_patience_stop():
    # first draw is the best; every later draw is worse
    space = builtin_space("fig3")
    configs = enumerate_configurations(space)
    rng = np.random.default_rng(0)
    losses = {c.canonical_id: float(v) for c, v in zip(configs, rng.uniform(0.3, 1, len(configs)))}
    probe = TrialStore()
    run(space, Table(losses), probe, RunSpec("random", budget=1, seed=5))
    losses[probe.trials[0].config_id] = 0.0
    res = run(space, Table(losses), TrialStore(), RunSpec("random", budget=100, patience=7, seed=5))
    assert (res.n_trials, res.stop_reason) == (8, PATIENCE)


def test_smbo_patience_after_non_improving_init(fix6):
    space, _ = fix6
    ids = [c.canonical_id for c in enumerate_configurations(space)]
    probe = TrialStore()
    run(space, Table(dict.fromkeys(ids, 0.5)), probe, RunSpec("smbo", budget=1, seed=2))
    first = probe.trials[0].config_id
    losses = {cid: (0.1 if cid == first else 0.5) for cid in ids}
    res = run(space, Table(losses), TrialStore(), RunSpec("smbo", patience=1, seed=2))
    assert (res.n_trials, res.stop_reason) == (2, PATIENCE)


@pytest.mark.parametrize("optimizer", ["random", "smbo"])
def test_same_seed_same_sequence(fig3, optimizer):
    space, ev = fig3
    a, b = TrialStore(), TrialStore()
    run(space, ev, a, RunSpec(optimizer, budget=40, seed=11))
    run(space, ev, b, RunSpec(optimizer, budget=40, seed=11))
    assert [t.config_id for t in a] == [t.config_id for t in b]
    c = TrialStore()
    run(space, ev, c, RunSpec(optimizer, budget=40, seed=12))
    assert [t.config_id for t in a] != [t.config_id for t in c]


@pytest.mark.parametrize("optimizer", ["random", "smbo"])
def test_running_best_is_monotone_and_honest(fig3, optimizer):
    space, ev = fig3
    store = TrialStore()
    res = run(space, ev, store, RunSpec(optimizer, budget=60, seed=1))
    assert np.all(np.diff(res.best_history) <= 0)
    assert res.best_history[-1] == res.best_loss
    assert best_matches_log(store, res)


def test_random_dedup_over_1000_trials(fig3):
    space, ev = fig3
    store = TrialStore()
    res = run(space, ev, store, RunSpec("random", budget=1000, patience=None, seed=7))
    ids = [t.config_id for t in store]
    assert res.n_trials == 1000 and len(set(ids)) == 1000


def test_random_switches_to_enumeration_near_exhaustion(fix6):
    space, ev = fix6
    store = TrialStore()
    res = run(space, ev, store, RunSpec("random", patience=None, seed=0))
    assert res.n_trials == 6 and len(store.seen(res.run_id)) == 6


def test_failed_trials_recorded_and_never_incumbent(fix6):
    space, _ = fix6
    losses = {c.canonical_id: 0.4 for c in enumerate_configurations(space)}
    losses.pop(BEST_FIX6)
    store = TrialStore()
    res = run(space, Table(losses), store, RunSpec("random", seed=3))
    failed = [t for t in store if not t.ok]
    assert [t.config_id for t in failed] == [BEST_FIX6]
    assert res.n_trials == 6 and res.best_loss == 0.4


def test_non_finite_loss_counts_as_failure(fix6):
    space, _ = fix6
    losses = {c.canonical_id: 0.4 for c in enumerate_configurations(space)}
    losses[BEST_FIX6] = float("nan")
    store = TrialStore()
    run(space, Table(losses), store, RunSpec("grid"))
    assert store.lookup(BEST_FIX6) is None and len(store) == 6


def test_workers_keep_commit_order(fig3):
    space, ev = fig3
    seq, par = TrialStore(), TrialStore()
    run(space, ev, seq, RunSpec("random", budget=50, seed=9))
    run(space, ev, par, RunSpec("random", budget=50, seed=9, workers=3))
    assert [t.config_id for t in seq] == [t.config_id for t in par]


def test_smbo_refuses_workers(fix6):
    space, ev = fix6
    with pytest.raises(ValueError, match="sequential"):
        run(space, ev, TrialStore(), RunSpec("smbo", workers=2))


@pytest.mark.parametrize("optimizer", ["grid", "random", "smbo"])
def test_resume_continues_without_repeats(fig3, optimizer):
    space, ev = fig3
    full = TrialStore()
    run(space, ev, full, RunSpec(optimizer, budget=30, seed=2, patience=None))
    partial = TrialStore(full.trials[:12])
    res = run(space, ev, partial, RunSpec(optimizer, budget=30, seed=2, patience=None))
    ids = [t.config_id for t in partial]
    assert res.n_trials == 30 and len(ids) == 30 and len(set(ids)) == 30
    if optimizer == "grid":
        assert ids == [t.config_id for t in full]


def test_hpo_mode_stays_on_path(fig3):
    space, ev = fig3
    store = TrialStore()
    res = run(space, ev, store, RunSpec("smbo", "hpo", FIG3_PATH, budget=25, seed=0))
    assert res.n_trials == 25 and {t.path_id for t in store} == {FIG3_PATH}


def test_smbo_full_budget_covers_fig3_path(fig3):
    space, ev = fig3
    grid, smbo = TrialStore(), TrialStore()
    g = run(space, ev, grid, RunSpec("grid", "hpo", FIG3_PATH))
    s = run(space, ev, smbo, RunSpec("smbo", "hpo", FIG3_PATH, patience=None, seed=6))
    assert s.n_trials == 120 and s.stop_reason == EXHAUSTED
    assert s.best_loss == g.best_loss


def test_random_and_smbo_entry_points_match_run(fix6):
    space, ev = fix6
    spec = RunSpec("random", seed=1)
    a, b = TrialStore(), TrialStore()
    random_search(space, spec.scope(space), ev, a, spec)
    run(space, ev, b, RunSpec("random", seed=1))
    assert a == b
    spec = RunSpec("smbo", seed=1)
    c, d = TrialStore(), TrialStore()
    smbo_search(space, spec.scope(space), ev, c, spec)
    run(space, ev, d, RunSpec("smbo", seed=1))
    assert c == d
