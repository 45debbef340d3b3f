"""Append-only log of evaluated configurations.

Within one run a canonical id may appear at most once; the same
configuration may recur under different run ids (repeated stochastic
runs).  The log persists as JSON lines, one trial per line; a log cut off
mid-line by an interrupted run loads with ``allow_truncated=True``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

from .config_space import ConfigSpace, Scope, ScopeIndex

__all__ = ["Trial", "TrialStore", "DuplicateTrialError", "InsufficientCoverage", "StoreFormatError"]

OK = "ok"
FAILED = "failed"


class DuplicateTrialError(ValueError):
    pass


class StoreFormatError(ValueError):
    pass


class InsufficientCoverage(LookupError):
    """No ok-trial matches a constraint that an attribution needs."""

    def __init__(self, predicate: str, runs=None):
        self.predicate = predicate
        self.runs = runs
        where = f" in runs {sorted(runs)}" if runs else ""
        super().__init__(f"insufficient coverage: no successful trial matches {predicate}{where}")


@dataclass(frozen=True)
class Trial:
    run_id: str
    draw_index: int
    config_id: str
    path_id: str
    loss: float | None
    status: str = OK
    optimizer: str = ""
    mode: str = ""
    seed: int | None = None
    fold_losses: tuple[float, ...] | None = None
    trial_id: int = 0
    elapsed_ms: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.status not in (OK, FAILED):
            raise ValueError(f"unknown status {self.status!r}")
        if (self.status == OK) != (self.loss is not None):
            raise ValueError("loss must be present exactly when status is ok")
        if self.loss is not None and not math.isfinite(self.loss):
            raise ValueError("loss must be finite")

    @property
    def ok(self) -> bool:
        return self.status == OK

    @property
    def rank_loss(self) -> float:
        """Loss used for ranking; failed trials rank last."""
        return self.loss if self.ok else math.inf

    def to_json(self, include_timing: bool = True) -> str:
        doc = asdict(self)
        if doc["fold_losses"] is not None:
            doc["fold_losses"] = list(doc["fold_losses"])
        if not include_timing or doc["elapsed_ms"] is None:
            doc.pop("elapsed_ms")
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, doc: dict) -> "Trial":
        doc = dict(doc)
        if doc.get("fold_losses") is not None:
            doc["fold_losses"] = tuple(doc["fold_losses"])
        return cls(**doc)


class TrialStore:
    def __init__(self, trials: Iterable[Trial] = ()):
        self.trials: list[Trial] = []
        self._by_run: dict[str, dict[str, Trial]] = {}
        self._best: dict[str, Trial] = {}
        for t in trials:
            self._append(t)

    def __len__(self) -> int:
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    def __eq__(self, other):
        return isinstance(other, TrialStore) and self.trials == other.trials

    @property
    def runs(self) -> dict[str, dict]:
        """Run registry: run id -> optimizer, mode, seed and trial count."""
        out: dict[str, dict] = {}
        for t in self.trials:
            info = out.setdefault(t.run_id, {"optimizer": t.optimizer, "mode": t.mode, "seed": t.seed, "trials": 0})
            info["trials"] += 1
        return out

    def run_trials(self, run_id: str) -> list[Trial]:
        return [t for t in self.trials if t.run_id == run_id]

    def seen(self, run_id: str) -> set[str]:
        return set(self._by_run.get(run_id, {}))

    def has(self, run_id: str, config_id: str) -> bool:
        return config_id in self._by_run.get(run_id, {})

    def record(self, trial: Trial) -> int:
        """Append ``trial`` and return its store-wide id (1-based)."""
        if trial.trial_id not in (0, len(self.trials) + 1):
            raise ValueError(f"trial id {trial.trial_id} out of sequence")
        trial = replace(trial, trial_id=len(self.trials) + 1)
        self._append(trial)
        return trial.trial_id

    def _append(self, trial: Trial) -> None:
        run = self._by_run.setdefault(trial.run_id, {})
        if trial.config_id in run:
            raise DuplicateTrialError(f"{trial.config_id!r} already recorded in run {trial.run_id!r}")
        run[trial.config_id] = trial
        self.trials.append(trial)
        if trial.ok:
            cur = self._best.get(trial.config_id)
            if cur is None or trial.loss < cur.loss:
                self._best[trial.config_id] = trial

    def lookup(self, config_id: str, runs: Iterable[str] | None = None) -> Trial | None:
        """Best ok-trial for ``config_id`` (lowest loss, then earliest)."""
        if runs is None:
            return self._best.get(config_id)
        best = None
        for r in runs:
            t = self._by_run.get(r, {}).get(config_id)
            if t is not None and t.ok and (best is None or (t.loss, t.trial_id) < (best.loss, best.trial_id)):
                best = t
        return best

    def select(self, runs: Iterable[str] | None = None, ok_only: bool = True) -> list[Trial]:
        runs = None if runs is None else set(runs)
        return [t for t in self.trials if (runs is None or t.run_id in runs) and (t.ok or not ok_only)]

    def min_over(self, space: ConfigSpace, scope: Scope | None = None, runs: Iterable[str] | None = None) -> tuple[float, Trial]:
        """Exact minimum loss among ok-trials inside ``scope``.

        Ties go to the lexicographically smallest canonical id.

        Raises
        ------
        InsufficientCoverage
            If no ok-trial in ``runs`` falls inside ``scope``.
        """
        scope = scope or Scope()
        runs = None if runs is None else set(runs)
        index = ScopeIndex(space, scope)
        best = None
        for t in self.select(runs):
            if best is not None and t.loss > best.loss:
                continue
            if not scope.is_whole and not index.contains(space.configuration(t.config_id)):
                continue
            if best is None or (t.loss, t.config_id) < (best.loss, best.config_id):
                best = t
        if best is None:
            raise InsufficientCoverage(scope.label, runs)
        return best.loss, best

    def persist(self, sink, include_timing: bool = True) -> None:
        """Write JSONL to a path or a text file object."""
        text = "".join(t.to_json(include_timing) + "\n" for t in self.trials)
        if hasattr(sink, "write"):
            sink.write(text)
        else:
            with open(sink, "w", encoding="utf-8") as fh:
                fh.write(text)

    @classmethod
    def load(cls, source, allow_truncated: bool = False) -> "TrialStore":
        if hasattr(source, "read"):
            text = source.read()
        else:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        return cls.loads(text, allow_truncated)

    @classmethod
    def loads(cls, text: str, allow_truncated: bool = False) -> "TrialStore":
        """Parse a JSONL log.

        A malformed line raises :class:`StoreFormatError` naming its line
        number, except that ``allow_truncated`` drops a malformed final line
        that lacks its newline.
        """
        store = cls()
        lines = text.splitlines()
        for lineno, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                trial = Trial.from_dict(json.loads(line))
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                if allow_truncated and lineno == len(lines) and not text.endswith("\n"):
                    break
                raise StoreFormatError(f"line {lineno}: {exc}") from None
            store._append(trial)
        return store

    @classmethod
    def merge(cls, stores: Sequence["TrialStore"]) -> "TrialStore":
        """Concatenate logs, renumbering trial ids in order."""
        out = cls()
        for s in stores:
            for t in s:
                out.record(replace(t, trial_id=0))
        return out
