"""How closely do random search and SMBO recover grid's step ECs at partial budget?

Runs grid once on FIG3-synth, then random and SMBO at a few budgets over
several seeds, and prints the mean absolute deviation from grid's ECs.

Run: python3 demos/fig3_optimizer_fidelity.py [--seeds 5]
"""
import argparse

import numpy as np

from pipeattrib import TrialStore, builtin_evaluator, make_evaluator
from pipeattrib.attribution import ec_level
from pipeattrib.optimizers import RunSpec, run

ap = argparse.ArgumentParser()
ap.add_argument("--seeds", type=int, default=5)
ap.add_argument("--budgets", type=int, nargs="+", default=[153, 459, 918])
args = ap.parse_args()

space, spec = builtin_evaluator("fig3-synth")
evaluator = make_evaluator(spec, space)
store = TrialStore()
grid = run(space, evaluator, store, RunSpec("grid"))


def step_ecs(run_id):
    return {e.target: e.value for e in ec_level(store, space, "step", runs=[run_id])}


ref = step_ecs(grid.run_id)
print("grid step ECs:", {k: round(v, 4) for k, v in ref.items()})
print(f"\n{'budget':>6} {'optimizer':<8} {'mean |dev|':>10} {'best loss':>10} {'time s':>7}")
for budget in args.budgets:
    for opt in ("random", "smbo"):
        devs, bests, secs = [], [], []
        for seed in range(args.seeds):
            res = run(space, evaluator, store, RunSpec(opt, budget=budget, patience=None, seed=seed))
            ecs = step_ecs(res.run_id)
            devs += [abs(ecs[k] - ref[k]) for k in ref]
            bests.append(res.best_loss)
            secs.append(res.elapsed_s)
        print(f"{budget:>6} {opt:<8} {np.mean(devs):>10.4f} {np.mean(bests):>10.4f} {np.mean(secs):>7.2f}")
