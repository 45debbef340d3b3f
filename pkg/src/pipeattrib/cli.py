"""Command-line interface: ``validate``, ``run``, ``attribute``, ``report``.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path as FsPath

from .attribution import ECReport, LEVELS, MODES as EC_MODES, aggregate, ec_level, level_targets
from .config_space import SpaceError, ScopeError, builtin_space, enumerate_paths, count_configurations, load_space, parse_path
from .evaluators import BUILTIN_EVALUATORS, EvaluationError, EvaluatorSpec, builtin_evaluator, make_evaluator
from .optimizers import MODES as RUN_MODES, OPTIMIZERS, RunSpec, run as run_optimizer
from .report import ec_chart_svg, split_by_chart, summary_table, timing_chart_svg
from .trial_store import InsufficientCoverage, StoreFormatError, Trial, TrialStore

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
OUT_ENV = "PIPEATTRIB_OUT"


class UsageError(Exception):
    pass


def safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text.replace("->", "-")).strip("_")


def parse_patience(text) -> int | None:
    if text is None or str(text).lower() in ("inf", "none", "infinity"):
        return None
    try:
        value = int(text)
    except ValueError:
        raise UsageError(f"patience must be a positive integer or 'inf', got {text!r}") from None
    if value < 1:
        raise UsageError("patience must be >= 1")
    return value


# --- inputs ---------------------------------------------------------------


def resolve_space(ref, base_dir=None):
    """Space from a file path, ``builtin:<name>``, a bare builtin name or an inline dict."""
    if isinstance(ref, dict):
        from .config_space import parse_space

        return parse_space(ref)
    ref = str(ref)
    if ref.startswith("builtin:"):
        return builtin_space(ref.split(":", 1)[1])
    p = FsPath(ref)
    if not p.is_absolute() and base_dir is not None:
        p = FsPath(base_dir) / p
    if p.exists():
        return load_space(p)
    try:
        return builtin_space(ref)
    except (ValueError, SpaceError, FileNotFoundError):
        raise UsageError(f"space file not found: {ref}") from None


def resolve_evaluator(ref, space_ref=None, base_dir=None):
    """(space, EvaluatorSpec) from a builtin evaluator name, a JSON file or a dict.

    A builtin evaluator brings its own space unless ``space_ref`` overrides it.
    """
    if ref is None:
        raise UsageError("an evaluator is required (--evaluator)")
    if isinstance(ref, str) and ref in BUILTIN_EVALUATORS:
        space, spec = builtin_evaluator(ref)
        if space_ref is not None:
            space = resolve_space(space_ref, base_dir)
        return space, spec
    if isinstance(ref, dict):
        doc, doc_dir = ref, base_dir
    else:
        p = FsPath(ref)
        if not p.is_absolute() and base_dir is not None:
            p = FsPath(base_dir) / p
        if not p.exists():
            raise UsageError(f"evaluator is neither a builtin ({', '.join(BUILTIN_EVALUATORS)}) nor a file: {ref}")
        doc, doc_dir = json.loads(p.read_text(encoding="utf-8")), p.parent
    if space_ref is None:
        raise UsageError("a custom evaluator needs --space")
    try:
        spec = EvaluatorSpec.from_dict(doc, doc_dir)
    except TypeError as exc:
        raise UsageError(f"bad evaluator spec: {exc}") from None
    return resolve_space(space_ref, base_dir), spec


@dataclass
class RunEntry:
    optimizer: str
    mode: str = "cash"
    path: str | None = None
    budget: int | None = None
    patience: int | None = 50
    repeats: int = 5
    workers: int = 1

    def specs(self, seed: int) -> list[RunSpec]:
        repeats = 1 if self.optimizer == "grid" else self.repeats
        return [
            RunSpec(self.optimizer, self.mode, self.path, self.budget, self.patience, seed + r, workers=self.workers)
            for r in range(repeats)
        ]


@dataclass
class RunConfig:
    space: object
    evaluator: object
    runs: list[RunEntry]
    seed: int = 0
    out: str | None = None
    attribute: list[dict] = field(default_factory=list)
    report: bool = False
    base_dir: str | None = None

    _KEYS = {"space", "evaluator", "runs", "seed", "out", "attribute", "report"}
    _RUN_KEYS = {"optimizer", "mode", "path", "budget", "patience", "repeats", "workers"}

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None) -> "RunConfig":
        unknown = set(doc) - cls._KEYS
        if unknown:
            raise UsageError(f"unknown run-config keys: {sorted(unknown)}")
        if "evaluator" not in doc or "runs" not in doc:
            raise UsageError("run config needs 'evaluator' and 'runs'")
        entries = []
        for i, r in enumerate(doc["runs"]):
            bad = set(r) - cls._RUN_KEYS
            if bad:
                raise UsageError(f"runs[{i}]: unknown keys {sorted(bad)}")
            if "optimizer" not in r:
                raise UsageError(f"runs[{i}]: missing 'optimizer'")
            r = dict(r)
            if "patience" in r:
                r["patience"] = parse_patience(r["patience"])
            entries.append(RunEntry(**r))
        for i, a in enumerate(doc.get("attribute", [])):
            if a.get("level") not in LEVELS:
                raise UsageError(f"attribute[{i}]: level must be one of {LEVELS}")
            if a.get("mode", "filter") not in EC_MODES:
                raise UsageError(f"attribute[{i}]: mode must be one of {EC_MODES}")
        return cls(
            doc.get("space"), doc["evaluator"], entries, int(doc.get("seed", 0)), doc.get("out"),
            list(doc.get("attribute", [])), bool(doc.get("report", False)), base_dir,
        )

    def validate(self) -> None:
        if not self.runs:
            raise UsageError("no runs requested")
        for i, r in enumerate(self.runs):
            if r.optimizer not in OPTIMIZERS:
                raise UsageError(f"runs[{i}]: unknown optimizer {r.optimizer!r}")
            if r.mode not in RUN_MODES:
                raise UsageError(f"runs[{i}]: unknown mode {r.mode!r}")
            if r.mode == "hpo" and not r.path:
                raise UsageError(f"runs[{i}]: hpo mode needs a path")
            if r.budget is not None and r.budget < 1:
                raise UsageError(f"runs[{i}]: budget must be >= 1")
            if r.repeats < 1:
                raise UsageError(f"runs[{i}]: repeats must be >= 1")
            if r.workers < 1:
                raise UsageError(f"runs[{i}]: workers must be >= 1")
            if r.optimizer == "smbo" and r.workers > 1:
                raise UsageError(f"runs[{i}]: smbo runs sequentially (workers must be 1)")


def output_dir(flag) -> FsPath:
    out = flag or os.environ.get(OUT_ENV)
    if not out:
        raise UsageError(f"no output directory: pass --out or set {OUT_ENV}")
    return FsPath(out)


# --- streaming trial log ----------------------------------------------------


class _LoggedStore(TrialStore):
    """Store that appends each committed trial to its run's log file at once."""

    def __init__(self, log_dir: FsPath):
        super().__init__()
        self.log_dir = log_dir
        self.files: dict[str, FsPath] = {}
        self._handles = {}

    def log_path(self, run_id: str) -> FsPath:
        return self.log_dir / f"{safe_name(run_id)}.jsonl"

    def record(self, trial: Trial) -> int:
        tid = super().record(trial)
        fh = self._handles.get(trial.run_id)
        if fh is None:
            path = self.log_path(trial.run_id)
            self.files[trial.run_id] = path
            fh = self._handles[trial.run_id] = open(path, "a", encoding="utf-8")
        fh.write(self.trials[-1].to_json() + "\n")
        fh.flush()
        return tid

    def adopt(self, path: FsPath) -> None:
        """Load an existing (possibly truncated) log so its run resumes."""
        text = path.read_text(encoding="utf-8")
        part = TrialStore.loads(text, allow_truncated=True)
        # rewrite without a cut-off tail so appends start on a fresh line
        path.write_text("".join(t.to_json() + "\n" for t in part), encoding="utf-8")
        for t in part:
            TrialStore.record(self, t)

    def close(self) -> None:
        for fh in self._handles.values():
            fh.close()
        self._handles.clear()


# --- commands ---------------------------------------------------------------


def cmd_validate(args) -> int:
    space = resolve_space(args.space)
    n_alg = sum(len(s.algorithms) for s in space.steps)
    n_paths = len(enumerate_paths(space))
    n_conf = count_configurations(space)
    print(f"valid: {len(space.steps)} steps, {n_alg} algorithms, {n_paths} paths, {n_conf} configurations")
    if args.verbose:
        for p in enumerate_paths(space):
            print(f"  {p.id}: {count_configurations(space, p)} configurations")
    return EXIT_OK


def _load_config(args) -> RunConfig:
    if args.config:
        p = FsPath(args.config)
        if not p.exists():
            raise UsageError(f"run config not found: {args.config}")
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"run config is not valid JSON: {exc}") from None
        cfg = RunConfig.from_dict(doc, base_dir=p.parent)
        if args.out:
            cfg.out = args.out
        return cfg
    if not args.optimizer:
        raise UsageError("pass --config or --optimizer")
    entries = [
        RunEntry(o, args.mode, args.path, args.budget, parse_patience(args.patience), args.repeats, args.workers)
        for o in args.optimizer
    ]
    return RunConfig(args.space, args.evaluator, entries, args.seed, args.out)


def _space_ref(cfg: RunConfig):
    """How the summary records the space, so ``attribute`` can reload it."""
    ref = cfg.space
    if ref is None:
        return f"builtin:{BUILTIN_EVALUATORS[cfg.evaluator][0]}"
    if isinstance(ref, dict) or str(ref).startswith("builtin:"):
        return ref
    p = FsPath(ref)
    if not p.is_absolute() and cfg.base_dir is not None:
        p = FsPath(cfg.base_dir) / p
    return str(p.resolve()) if p.exists() else f"builtin:{ref}"


def execute(cfg: RunConfig, resume: bool = False, stream=None) -> dict:
    """Run every entry of ``cfg``; returns the run summary (also written to disk)."""
    stream = stream or sys.stdout
    cfg.validate()
    space, ev_spec = resolve_evaluator(cfg.evaluator, cfg.space, cfg.base_dir)
    for r in cfg.runs:
        if r.path:
            try:
                parse_path(space, r.path)
            except (ScopeError, SpaceError, ValueError) as exc:
                raise UsageError(str(exc)) from None
    out = FsPath(cfg.out) if cfg.out else output_dir(None)
    logs = out / "logs"
    logs.mkdir(parents=True, exist_ok=True)
    try:
        evaluator = make_evaluator(ev_spec, space)
    except Exception as exc:
        raise EvaluationError(f"cannot build evaluator: {exc}") from exc
    store = _LoggedStore(logs)
    summary = {"space": _space_ref(cfg), "evaluator": ev_spec.to_dict(), "seed": cfg.seed, "runs": []}
    previous = []
    if resume and (out / "summary.json").exists():
        previous = json.loads((out / "summary.json").read_text(encoding="utf-8")).get("runs", [])
    try:
        for entry in cfg.runs:
            for spec in entry.specs(cfg.seed):
                log = store.log_path(spec.run_id)
                if log.exists():
                    if resume:
                        store.adopt(log)
                    else:
                        log.unlink()
                res = run_optimizer(space, evaluator, store, spec)
                summary["runs"].append(
                    {
                        "run_id": spec.run_id,
                        "optimizer": spec.optimizer,
                        "mode": spec.mode,
                        "path": spec.path,
                        "seed": spec.seed,
                        "budget": spec.budget,
                        "patience": spec.patience,
                        "n_trials": res.n_trials,
                        "best_loss": None if res.best is None else res.best.loss,
                        "best_config": None if res.best is None else res.best.config_id,
                        "stop_reason": res.stop_reason,
                        "elapsed_s": round(res.elapsed_s, 6),
                        "log": str(log.relative_to(out)),
                    }
                )
                best = "n/a" if res.best is None else f"{res.best.loss:.6f}"
                print(f"{spec.run_id}: {res.n_trials} trials, best {best}, stop {res.stop_reason}, {res.elapsed_s:.2f}s", file=stream)
    finally:
        store.close()
        done = {r["run_id"] for r in summary["runs"]}
        summary["runs"] = [r for r in previous if r["run_id"] not in done] + summary["runs"]
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    if cfg.attribute:
        reports = []
        for a in cfg.attribute:
            rep = attribute_store(store, space, a["level"], a.get("path"), a.get("mode", "filter"))
            name = f"ec_{a['level']}" + (f"_{safe_name(a['path'])}" if a.get("path") else "") + ".csv"
            rep.write_csv(out / name)
            reports.append(rep)
            print(f"wrote {out / name}", file=stream)
        if cfg.report:
            write_report(reports, [summary], out / "report", stream)
    return summary


def cmd_run(args) -> int:
    cfg = _load_config(args)
    if cfg.out is None:
        cfg.out = str(output_dir(None))
    execute(cfg, resume=args.resume)
    return EXIT_OK


def _constrained(run_id: str) -> bool:
    return "|" in run_id


def attribute_store(store, space, level, path=None, mode="filter", evaluator=None, template=None) -> ECReport:
    """Per-run estimates for every eligible run in ``store``, aggregated per optimizer.

    A run is eligible for step attribution if it searched the whole space,
    and for path-level attribution if it searched the whole space or that
    path.  In reopt mode each eligible run is the base of its own set of
    constrained runs, built from ``template`` (budget, patience) with the
    run's optimizer and seed.
    """
    if level != "step" and not path:
        raise UsageError(f"level {level!r} needs --path")
    level_targets(space, level, path)
    path_id = parse_path(space, path).id if path else None
    estimates = []
    for run_id, info in store.runs.items():
        if _constrained(run_id):
            continue
        if info["mode"] == "hpo":
            paths = {t.path_id for t in store.run_trials(run_id)}
            if level == "step" or paths != {path_id}:
                continue
        spec = None
        if mode == "reopt":
            if evaluator is None:
                raise UsageError("reopt mode needs --evaluator")
            base = template or RunSpec(info["optimizer"])
            spec = RunSpec(
                info["optimizer"], info["mode"], path if info["mode"] == "hpo" else None,
                base.budget, base.patience, info["seed"] or 0, run_id=run_id,
            )
        estimates.extend(ec_level(store, space, level, path, [run_id], mode, evaluator, spec))
    if not estimates:
        raise UsageError(f"no runs in the logs are eligible for {level}-level attribution" + (f" on {path}" if path else ""))
    return aggregate(estimates, {"level": level, "path": path_id or "", "mode": mode})


def _collect_logs(paths) -> tuple[TrialStore, dict | None]:
    files, summary = [], None
    for p in map(FsPath, paths):
        if p.is_dir():
            if (p / "summary.json").exists():
                summary = json.loads((p / "summary.json").read_text(encoding="utf-8"))
            sub = p / "logs" if (p / "logs").is_dir() else p
            files.extend(sorted(sub.glob("*.jsonl")))
        elif p.exists():
            files.append(p)
        else:
            raise UsageError(f"log not found: {p}")
    if not files:
        raise UsageError("no trial logs given")
    stores = [TrialStore.load(f) for f in files]
    return TrialStore.merge(stores), summary


def cmd_attribute(args) -> int:
    store, summary = _collect_logs(args.logs)
    space_ref = args.space or (summary or {}).get("space")
    evaluator = None
    if args.mode == "reopt":
        ev_ref = args.evaluator or (summary or {}).get("evaluator")
        if ev_ref is None:
            raise UsageError("reopt mode needs --evaluator")
        space, spec = resolve_evaluator(ev_ref, space_ref)
        evaluator = make_evaluator(spec, space)
    elif space_ref is not None:
        space = resolve_space(space_ref)
    elif args.evaluator in BUILTIN_EVALUATORS:
        space = builtin_evaluator(args.evaluator)[0]
    else:
        raise UsageError("pass --space (or a run directory containing summary.json)")
    template = RunSpec("grid", budget=args.budget, patience=parse_patience(args.patience))
    n_before = len(store)
    rep = attribute_store(store, space, args.level, args.path, args.mode, evaluator, template)
    text = rep.to_csv()
    if args.out:
        out = FsPath(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        if len(store) > n_before:
            # keep the trials of the constrained runs next to the CSV
            TrialStore(store.trials[n_before:]).persist(out.with_suffix(".reopt.jsonl"))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def write_report(reports: list[ECReport], summaries: list[dict], out: FsPath, stream=None) -> list[FsPath]:
    stream = stream or sys.stdout
    out.mkdir(parents=True, exist_ok=True)
    written = []
    rows = [r for rep in reports for r in rep.rows]
    for key, group in split_by_chart(rows).items():
        p = out / f"ec_{safe_name(key)}.svg"
        p.write_text(ec_chart_svg(group), encoding="utf-8")
        written.append(p)
    for i, s in enumerate(summaries):
        if s.get("runs"):
            p = out / ("timing.svg" if len(summaries) == 1 else f"timing_{i + 1}.svg")
            p.write_text(timing_chart_svg(s), encoding="utf-8")
            written.append(p)
    p = out / "summary.txt"
    p.write_text(summary_table(reports, summaries), encoding="utf-8")
    written.append(p)
    for p in written:
        print(f"wrote {p}", file=stream)
    return written


def cmd_report(args) -> int:
    if not args.reports:
        raise UsageError("at least one EC report CSV is required")
    reports = []
    for p in args.reports:
        if not FsPath(p).exists():
            raise UsageError(f"report not found: {p}")
        try:
            reports.append(ECReport.read_csv(p))
        except ValueError as exc:
            raise UsageError(f"{p}: {exc}") from None
    if not any(rep.rows for rep in reports):
        raise UsageError("all EC reports are empty")
    summaries = []
    for p in args.summary or []:
        summaries.append(json.loads(FsPath(p).read_text(encoding="utf-8")))
    write_report(reports, summaries, output_dir(args.out))
    return EXIT_OK


# --- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pipeattrib", description="Error attribution for ML pipeline search spaces.")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a space file and print its size")
    v.add_argument("space", nargs="?", help="space JSON file or builtin:<name>")
    v.add_argument("--space", dest="space_flag", help="same as the positional argument")
    v.add_argument("-v", "--verbose", action="store_true", help="list every path")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="run optimizers and write trial logs")
    r.add_argument("--config", help="run-config JSON (overrides the run flags)")
    r.add_argument("--space", help="space JSON file or builtin:<name>")
    r.add_argument("--evaluator", help=f"builtin ({', '.join(BUILTIN_EVALUATORS)}) or evaluator JSON file")
    r.add_argument("--optimizer", action="append", choices=OPTIMIZERS, help="repeatable")
    r.add_argument("--mode", choices=RUN_MODES, default="cash")
    r.add_argument("--path", help="path id for hpo mode, e.g. A->C")
    r.add_argument("--budget", type=int, help="evaluations per run (default: scope size)")
    r.add_argument("--patience", default="50", help="evaluations without improvement before stopping, or 'inf'")
    r.add_argument("--repeats", type=int, default=5, help="runs per stochastic optimizer (grid always 1)")
    r.add_argument("--seed", type=int, default=0, help="repeat i uses seed + i")
    r.add_argument("--workers", type=int, default=1, help="parallel evaluations for grid/random")
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV})")
    r.add_argument("--resume", action="store_true", help="continue runs whose logs already exist")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("attribute", help="compute error contributions from trial logs")
    a.add_argument("logs", nargs="+", help="JSONL logs or run output directories")
    a.add_argument("--level", choices=LEVELS, required=True)
    a.add_argument("--path", help="path id (algorithm and hyperparameter levels)")
    a.add_argument("--mode", choices=EC_MODES, default="filter")
    a.add_argument("--space", help="space (default: from the run directory's summary.json)")
    a.add_argument("--evaluator", help="evaluator for reopt mode")
    a.add_argument("--budget", type=int, help="budget of each constrained run (reopt)")
    a.add_argument("--patience", default="50", help="patience of each constrained run (reopt)")
    a.add_argument("--out", help="CSV file (default: stdout)")
    a.set_defaults(func=cmd_attribute)

    p = sub.add_parser("report", help="draw SVG charts and a summary table")
    p.add_argument("reports", nargs="*", help="EC report CSVs")
    p.add_argument("--summary", action="append", help="run summary.json for the timing chart (repeatable)")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV})")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "validate":
        args.space = args.space or args.space_flag
        if not args.space:
            ap.error("validate needs a space file")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpaceError, ScopeError, StoreFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InsufficientCoverage as exc:
        print(f"error: {exc}; rerun with --mode reopt or a larger budget", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("interrupted; partial logs kept", file=sys.stderr)
        return EXIT_RUNTIME
    except (EvaluationError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
