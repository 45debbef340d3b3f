import json
from importlib import resources

import pytest

from pipeattrib.evaluators import builtin_evaluator, make_evaluator
from pipeattrib.optimizers import RunSpec, run
from pipeattrib.trial_store import TrialStore


def _bench(name):
    space, spec = builtin_evaluator(name)
    return space, make_evaluator(spec, space)


@pytest.fixture(scope="session")
def fix6():
    return _bench("fix6-table")


@pytest.fixture(scope="session")
def fix6_losses():
    return json.loads(resources.files("pipeattrib.data").joinpath("fix6_losses.json").read_text(encoding="utf-8"))


@pytest.fixture
def fix6_grid(fix6):
    space, ev = fix6
    store = TrialStore()
    run(space, ev, store, RunSpec("grid"))
    return space, store


@pytest.fixture(scope="session")
def fig3():
    return _bench("fig3-synth")


@pytest.fixture(scope="session")
def miniml():
    return _bench("miniml")


@pytest.fixture(scope="session")
def miniml_grid(miniml):
    """Full MINIML grid run, shared because it takes several seconds."""
    space, ev = miniml
    store = TrialStore()
    result = run(space, ev, store, RunSpec("grid"))
    return space, ev, store, result


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[n])
