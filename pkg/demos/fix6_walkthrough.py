"""Error contributions on the six-configuration FIX-6 table, by hand and by library.

Run: python3 demos/fix6_walkthrough.py
"""
from pipeattrib import TrialStore, builtin_evaluator, make_evaluator
from pipeattrib.attribution import aggregate, ec_level
from pipeattrib.optimizers import RunSpec, run
from pipeattrib.report import summary_table

space, spec = builtin_evaluator("fix6-table")
evaluator = make_evaluator(spec, space)

store = TrialStore()
result = run(space, evaluator, store, RunSpec("grid"))
print(f"grid: {result.n_trials} trials, best {result.best_loss} at {result.best.config_id}\n")

for t in store:
    print(f"  {t.config_id:<24} {t.loss:.2f}")

# step S1 chooses between A and B: best under A is 0.20, under B 0.25,
# so EC = mean(0.20, 0.25) - 0.20 = 0.025
s1 = ec_level(store, space, "step")[0]
print(f"\nS1 constrained minima {dict(s1.constrained_minima)}, reference {s1.reference_min}, EC {s1.value:.3f}")

reports = [aggregate(ec_level(store, space, "step"))]
for level in ("algorithm", "hyperparameter"):
    reports.append(aggregate(ec_level(store, space, level, "A->C")))
print()
print(summary_table(reports))
