"""Agnostic error attribution for optimized ML pipelines.

A pipeline search space is a sequence of steps, each offering algorithms
with discrete hyperparameter domains.  Optimizers (grid, random, SMBO)
evaluate configurations into a trial store; attribution then measures how
much the best reachable loss depends on the choice made in each step, for
each algorithm and for each hyperparameter.
"""
from .attribution import (
    ECEstimate,
    ECReport,
    ECRow,
    aggregate,
    attribute_runs,
    ec_algorithm,
    ec_hyperparameter,
    ec_level,
    ec_step,
)
from .config_space import (
    ConfigSpace,
    Configuration,
    Scope,
    ScopeIndex,
    builtin_space,
    count_configurations,
    decode,
    encode,
    enumerate_configurations,
    load_space,
    parse_configuration,
    parse_space,
    sample_configuration,
)
from .evaluators import EvaluatorSpec, builtin_evaluator, evaluate, make_evaluator
from .optimizers import RunResult, RunSpec, grid_search, random_search, run, smbo_search
from .trial_store import InsufficientCoverage, Trial, TrialStore

__version__ = "0.1.0"
