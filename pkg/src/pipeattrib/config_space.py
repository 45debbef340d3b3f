"""Pipeline configuration spaces.

A space is a linear chain of steps; each step offers alternative algorithms,
and each algorithm owns a (possibly empty) list of hyperparameters with finite
ordered domains.  A hyperparameter is active only when its algorithm is the
one chosen for its step.

Configurations are enumerated in a fixed order: paths first (first step
slowest, algorithms in declaration order), then an odometer over the active
hyperparameter domains with the last declared hyperparameter turning fastest.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from itertools import product
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "SpaceError",
    "ScopeError",
    "Hyperparameter",
    "AlgorithmSpec",
    "Step",
    "ConfigSpace",
    "Path",
    "Configuration",
    "Scope",
    "ScopeIndex",
    "parse_space",
    "load_space",
    "builtin_space",
    "enumerate_paths",
    "count_configurations",
    "enumerate_configurations",
    "sample_configuration",
    "encode",
    "decode",
    "parse_configuration",
    "parse_path",
    "format_value",
]

INACTIVE = -1.0
_KINDS = ("int", "float", "bool", "categorical")
_RESERVED = set("=|(),")


class SpaceError(ValueError):
    """Invalid space definition; the message carries the offending location."""


class ScopeError(ValueError):
    """A scope refers to steps, algorithms or values that do not exist."""


def format_value(value: Any) -> str:
    """Render a domain value the way it appears in canonical ids."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class Hyperparameter:
    name: str
    kind: str
    values: tuple

    @property
    def size(self) -> int:
        return len(self.values)

    def index(self, value) -> int:
        # bool is an int subclass; compare on rendered form so True != 1
        key = format_value(value)
        for i, v in enumerate(self.values):
            if format_value(v) == key:
                return i
        raise ValueError(f"{value!r} not in domain of {self.name!r}")


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    hyperparameters: tuple[Hyperparameter, ...] = ()

    @property
    def n_configs(self) -> int:
        return math.prod(h.size for h in self.hyperparameters)

    def hyperparameter(self, name: str) -> Hyperparameter:
        for h in self.hyperparameters:
            if h.name == name:
                return h
        raise KeyError(name)


@dataclass(frozen=True)
class Step:
    name: str
    algorithms: tuple[AlgorithmSpec, ...]

    def algorithm(self, name: str) -> AlgorithmSpec:
        for a in self.algorithms:
            if a.name == name:
                return a
        raise KeyError(name)

    def algorithm_index(self, name: str) -> int:
        for i, a in enumerate(self.algorithms):
            if a.name == name:
                return i
        raise KeyError(name)


@dataclass(frozen=True)
class Path:
    """One algorithm name per step, in step order."""

    algorithms: tuple[str, ...]

    @property
    def id(self) -> str:
        return "->".join(self.algorithms)

    def __str__(self) -> str:
        return self.id


def _hp_id(step: str, algorithm: str, hp: str) -> str:
    return f"{step}.{algorithm}.{hp}"


@dataclass(frozen=True, eq=False)
class ConfigSpace:
    name: str
    steps: tuple[Step, ...]

    def __post_init__(self):
        _validate(self)

    # identity semantics keep hashing cheap; structural equality is explicit
    def __eq__(self, other):
        if not isinstance(other, ConfigSpace):
            return NotImplemented
        return self is other or (self.name, self.steps) == (other.name, other.steps)

    def __hash__(self):
        return hash((self.name, self.steps))

    def step(self, name: str) -> Step:
        for s in self.steps:
            if s.name == name:
                return s
        raise ScopeError(f"unknown step {name!r}")

    def step_index(self, name: str) -> int:
        for i, s in enumerate(self.steps):
            if s.name == name:
                return i
        raise ScopeError(f"unknown step {name!r}")

    @cached_property
    def hyperparameter_slots(self) -> tuple[tuple[str, str, Hyperparameter], ...]:
        """(step, algorithm, hyperparameter) for every hyperparameter, in declaration order."""
        return tuple(
            (s.name, a.name, h)
            for s in self.steps
            for a in s.algorithms
            for h in a.hyperparameters
        )

    @cached_property
    def _slot_of(self) -> dict[str, int]:
        return {_hp_id(s, a, h.name): i for i, (s, a, h) in enumerate(self.hyperparameter_slots)}

    def resolve_hyperparameter(self, ref: str) -> tuple[str, str, Hyperparameter]:
        """Resolve ``step.algorithm.hp`` or an unambiguous bare hyperparameter name."""
        if ref in self._slot_of:
            return self.hyperparameter_slots[self._slot_of[ref]]
        hits = [slot for slot in self.hyperparameter_slots if slot[2].name == ref]
        if len(hits) == 1:
            return hits[0]
        if not hits:
            raise ScopeError(f"unknown hyperparameter {ref!r}")
        raise ScopeError(f"ambiguous hyperparameter {ref!r}; use step.algorithm.name")

    @property
    def encoding_width(self) -> int:
        return len(self.steps) + len(self.hyperparameter_slots)

    def algorithms_of(self, path: Path) -> list[AlgorithmSpec]:
        return [s.algorithm(a) for s, a in zip(self.steps, path.algorithms)]

    @cached_property
    def _parsed(self) -> dict:
        return {}

    def configuration(self, canonical_id: str) -> "Configuration":
        """Memoised :func:`parse_configuration`."""
        cfg = self._parsed.get(canonical_id)
        if cfg is None:
            cfg = self._parsed[canonical_id] = parse_configuration(self, canonical_id)
        return cfg


def _validate(space: ConfigSpace) -> None:
    if not space.steps:
        raise SpaceError(f"space {space.name!r}: no steps")
    seen_steps = set()
    for s in space.steps:
        loc = f"step {s.name!r}"
        if s.name in seen_steps:
            raise SpaceError(f"{loc}: duplicate step name")
        seen_steps.add(s.name)
        _check_name(s.name, loc)
        if not s.algorithms:
            raise SpaceError(f"{loc}: no algorithms")
        seen_algos = set()
        for a in s.algorithms:
            aloc = f"{loc}, algorithm {a.name!r}"
            if a.name in seen_algos:
                raise SpaceError(f"{aloc}: duplicate algorithm name")
            seen_algos.add(a.name)
            _check_name(a.name, aloc)
            seen_hps = set()
            for h in a.hyperparameters:
                hloc = f"{aloc}, hyperparameter {h.name!r}"
                if h.name in seen_hps:
                    raise SpaceError(f"{hloc}: duplicate hyperparameter name")
                seen_hps.add(h.name)
                _check_name(h.name, hloc)
                if h.kind not in _KINDS:
                    raise SpaceError(f"{hloc}: unknown domain kind {h.kind!r}")
                if not h.values:
                    raise SpaceError(f"{hloc}: empty domain")
                rendered = [format_value(v) for v in h.values]
                if len(set(rendered)) != len(rendered):
                    raise SpaceError(f"{hloc}: duplicate domain values")
                for r in rendered:
                    if _RESERVED & set(r) or not r:
                        raise SpaceError(f"{hloc}: value {r!r} uses a reserved character")


def _check_name(name: str, loc: str) -> None:
    if not isinstance(name, str) or not name or _RESERVED & set(name) or "." in name:
        raise SpaceError(f"{loc}: invalid name")


def _coerce_values(kind: str, values: list, loc: str) -> tuple:
    out = []
    for v in values:
        if kind == "int":
            if isinstance(v, bool) or not isinstance(v, int):
                raise SpaceError(f"{loc}: {v!r} is not an int")
            out.append(v)
        elif kind == "float":
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise SpaceError(f"{loc}: {v!r} is not a number")
            out.append(float(v))
        elif kind == "bool":
            if not isinstance(v, bool):
                raise SpaceError(f"{loc}: {v!r} is not a bool")
            out.append(v)
        else:
            if not isinstance(v, (str, int, float, bool)):
                raise SpaceError(f"{loc}: {v!r} is not a scalar")
            out.append(v)
    return tuple(out)


def parse_space(text: str | dict) -> ConfigSpace:
    """Build a validated :class:`ConfigSpace` from a JSON space document.

    Raises
    ------
    SpaceError
        On malformed JSON, missing fields, duplicate names, unknown domain
        kinds or empty domains.  Messages name the step / algorithm /
        hyperparameter involved.
    """
    if isinstance(text, str):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpaceError(f"malformed document: {exc}") from None
    else:
        doc = text
    if not isinstance(doc, dict) or "steps" not in doc:
        raise SpaceError("malformed document: expected an object with 'steps'")
    steps = []
    for si, sdoc in enumerate(doc["steps"]):
        sname = sdoc.get("name") if isinstance(sdoc, dict) else None
        loc = f"step {sname or si!r}"
        if not isinstance(sdoc, dict) or not isinstance(sdoc.get("algorithms"), list):
            raise SpaceError(f"{loc}: expected 'name' and 'algorithms'")
        algos = []
        for ai, adoc in enumerate(sdoc["algorithms"]):
            aname = adoc.get("name") if isinstance(adoc, dict) else None
            aloc = f"{loc}, algorithm {aname or ai!r}"
            if not isinstance(adoc, dict) or aname is None:
                raise SpaceError(f"{aloc}: expected 'name'")
            hps = []
            for hi, hdoc in enumerate(adoc.get("hyperparameters", [])):
                hname = hdoc.get("name") if isinstance(hdoc, dict) else None
                hloc = f"{aloc}, hyperparameter {hname or hi!r}"
                if not isinstance(hdoc, dict) or hname is None or "values" not in hdoc:
                    raise SpaceError(f"{hloc}: expected 'name', 'type' and 'values'")
                kind = hdoc.get("type", "categorical")
                if kind not in _KINDS:
                    raise SpaceError(f"{hloc}: unknown domain kind {kind!r}")
                if not isinstance(hdoc["values"], list):
                    raise SpaceError(f"{hloc}: 'values' must be a list")
                if not hdoc["values"]:
                    raise SpaceError(f"{hloc}: empty domain")
                hps.append(Hyperparameter(hname, kind, _coerce_values(kind, hdoc["values"], hloc)))
            algos.append(AlgorithmSpec(aname, tuple(hps)))
        steps.append(Step(sname, tuple(algos)))
    return ConfigSpace(doc.get("name", "space"), tuple(steps))


def load_space(path) -> ConfigSpace:
    with open(path, encoding="utf-8") as fh:
        return parse_space(fh.read())


def builtin_space(name: str) -> ConfigSpace:
    """Load one of the bundled spaces: ``fig3``, ``fix6`` or ``miniml``."""
    text = resources.files("pipeattrib.data").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return parse_space(text)


@dataclass(frozen=True)
class Configuration:
    """A path plus values for exactly the hyperparameters active on it.

    ``values`` holds ``(hyperparameter id, value)`` pairs in declaration
    order, where the id is ``step.algorithm.name``.
    """

    path: Path
    values: tuple[tuple[str, Any], ...]
    canonical_id: str = field(compare=False, hash=False, repr=False, default="")

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.canonical_id == other.canonical_id

    def __hash__(self):
        return hash(self.canonical_id)

    @property
    def assignments(self) -> dict[str, Any]:
        return dict(self.values)

    def __str__(self) -> str:
        return self.canonical_id


def _make_config(space: ConfigSpace, path: Path, values: Sequence) -> Configuration:
    # values: flat list aligned with the path's hyperparameters
    pairs = []
    segments = []
    it = iter(values)
    for s, a in zip(space.steps, space.algorithms_of(path)):
        parts = []
        for h in a.hyperparameters:
            v = next(it)
            pairs.append((_hp_id(s.name, a.name, h.name), v))
            parts.append(f"{h.name}={format_value(v)}")
        segments.append(f"{s.name}={a.name}({','.join(parts)})")
    return Configuration(path, tuple(pairs), "|".join(segments))


def make_configuration(space: ConfigSpace, path: Path | Sequence[str], assignments: dict | None = None) -> Configuration:
    """Build a configuration from a path and a mapping of hyperparameter refs to values.

    Keys may be full ids (``step.algorithm.name``) or bare names when those are
    unambiguous on the path.  Every active hyperparameter must be assigned.
    """
    path = path if isinstance(path, Path) else Path(tuple(path))
    _check_path(space, path)
    assignments = dict(assignments or {})
    flat = []
    used = set()
    for s, a in zip(space.steps, space.algorithms_of(path)):
        for h in a.hyperparameters:
            full = _hp_id(s.name, a.name, h.name)
            key = full if full in assignments else h.name
            if key not in assignments:
                raise ScopeError(f"missing value for {full}")
            used.add(key)
            try:
                flat.append(h.values[h.index(assignments[key])])
            except ValueError as exc:
                raise ScopeError(str(exc)) from None
    extra = set(assignments) - used
    if extra:
        raise ScopeError(f"inactive or unknown hyperparameters: {sorted(extra)}")
    return _make_config(space, path, flat)


def _check_path(space: ConfigSpace, path: Path) -> None:
    if len(path.algorithms) != len(space.steps):
        raise ScopeError(f"path {path.id!r} has {len(path.algorithms)} algorithms for {len(space.steps)} steps")
    for s, a in zip(space.steps, path.algorithms):
        try:
            s.algorithm(a)
        except KeyError:
            raise ScopeError(f"step {s.name!r} has no algorithm {a!r}") from None


def parse_path(space: ConfigSpace, text: str | Path | Sequence[str]) -> Path:
    """Accept ``A->C``, ``A,C`` or ``S1=A|S2=C`` and return a checked :class:`Path`."""
    if isinstance(text, Path):
        path = text
    elif isinstance(text, str):
        if "|" in text or "=" in text:
            names = [seg.split("=", 1)[1].split("(", 1)[0] for seg in text.split("|")]
        elif "->" in text:
            names = text.split("->")
        else:
            names = text.split(",")
        path = Path(tuple(n.strip() for n in names))
    else:
        path = Path(tuple(text))
    _check_path(space, path)
    return path


def parse_configuration(space: ConfigSpace, canonical_id: str) -> Configuration:
    """Inverse of ``Configuration.canonical_id``."""
    segments = canonical_id.split("|")
    if len(segments) != len(space.steps):
        raise ScopeError(f"bad canonical id {canonical_id!r}")
    algos, flat = [], []
    for s, seg in zip(space.steps, segments):
        head, _, rest = seg.partition("(")
        sname, _, aname = head.partition("=")
        if sname != s.name or not rest.endswith(")"):
            raise ScopeError(f"bad segment {seg!r} in {canonical_id!r}")
        try:
            a = s.algorithm(aname)
        except KeyError:
            raise ScopeError(f"step {s.name!r} has no algorithm {aname!r}") from None
        body = rest[:-1]
        parts = body.split(",") if body else []
        if len(parts) != len(a.hyperparameters):
            raise ScopeError(f"bad hyperparameter list in {seg!r}")
        for h, part in zip(a.hyperparameters, parts):
            hname, _, raw = part.partition("=")
            if hname != h.name:
                raise ScopeError(f"expected {h.name!r} in {seg!r}")
            match = [v for v in h.values if format_value(v) == raw]
            if not match:
                raise ScopeError(f"{raw!r} not in domain of {s.name}.{a.name}.{h.name}")
            flat.append(match[0])
        algos.append(aname)
    return _make_config(space, Path(tuple(algos)), flat)


def enumerate_paths(space: ConfigSpace) -> list[Path]:
    return [Path(p) for p in product(*[[a.name for a in s.algorithms] for s in space.steps])]


@dataclass(frozen=True)
class Scope:
    """A constrained subset of the configuration space.

    ``algorithms`` fixes the algorithm of some steps; ``values`` fixes some
    hyperparameters (by full id).  Fixing a hyperparameter implicitly fixes
    its algorithm.  The empty scope is the whole space.
    """

    algorithms: tuple[tuple[str, str], ...] = ()
    values: tuple[tuple[str, Any], ...] = ()

    @classmethod
    def whole(cls) -> "Scope":
        return cls()

    @classmethod
    def on_path(cls, space: ConfigSpace, path) -> "Scope":
        path = parse_path(space, path)
        return cls(tuple((s.name, a) for s, a in zip(space.steps, path.algorithms)))

    @classmethod
    def with_algorithm(cls, step: str, algorithm: str) -> "Scope":
        return cls(((step, algorithm),))

    def constrain(self, algorithms: Iterable[tuple[str, str]] = (), values: Iterable[tuple[str, Any]] = ()) -> "Scope":
        return Scope(self.algorithms + tuple(algorithms), self.values + tuple(values))

    @property
    def is_whole(self) -> bool:
        return not self.algorithms and not self.values

    @property
    def label(self) -> str:
        parts = [f"{s}={a}" for s, a in self.algorithms]
        parts += [f"{k.split('.')[-1]}={format_value(v)}" for k, v in self.values]
        return ",".join(parts) or "*"


def algorithm_scope(space: ConfigSpace, path, step: str, base: Configuration | None = None) -> Scope:
    """Path scope with every hyperparameter outside ``step``'s algorithm pinned.

    Pinned values come from ``base`` (default: first value of each domain).
    Its size is the algorithm's hyperparameter-configuration count.
    """
    path = parse_path(space, path)
    idx = space.step_index(step)
    pins = _pins_from_base(space, path, base, keep=lambda i, hid: i != idx)
    return Scope.on_path(space, path).constrain(values=pins)


def hyperparameter_scope(space: ConfigSpace, path, hyperparameter: str, base: Configuration | None = None) -> Scope:
    """Path scope with every hyperparameter except ``hyperparameter`` pinned."""
    path = parse_path(space, path)
    sname, aname, h = space.resolve_hyperparameter(hyperparameter)
    target = _hp_id(sname, aname, h.name)
    if path.algorithms[space.step_index(sname)] != aname:
        raise ScopeError(f"{target} is not active on path {path.id!r}")
    pins = _pins_from_base(space, path, base, keep=lambda i, hid: hid != target)
    return Scope.on_path(space, path).constrain(values=pins)


def _pins_from_base(space, path, base, keep):
    if base is not None and base.path != path:
        raise ScopeError("base configuration lies on a different path")
    given = base.assignments if base is not None else {}
    pins = []
    for i, (s, a) in enumerate(zip(space.steps, space.algorithms_of(path))):
        for h in a.hyperparameters:
            hid = _hp_id(s.name, a.name, h.name)
            if keep(i, hid):
                pins.append((hid, given.get(hid, h.values[0])))
    return pins


class ScopeIndex:
    """Bijection between the configurations of a scope and ``range(size)``.

    Rank order equals enumeration order.
    """

    def __init__(self, space: ConfigSpace, scope: Scope | None = None):
        scope = scope or Scope()
        self.space = space
        self.scope = scope
        allowed = [list(s.algorithms) for s in space.steps]
        step_pos = {s.name: i for i, s in enumerate(space.steps)}
        for sname, aname in scope.algorithms:
            if sname not in step_pos:
                raise ScopeError(f"unknown step {sname!r}")
            i = step_pos[sname]
            allowed[i] = [a for a in allowed[i] if a.name == aname]
            if not allowed[i]:
                raise ScopeError(f"step {sname!r} has no algorithm {aname!r} in scope")
        fixed: dict[str, Any] = {}
        for hid, v in scope.values:
            sname, aname, h = space.resolve_hyperparameter(hid)
            i = step_pos[sname]
            allowed[i] = [a for a in allowed[i] if a.name == aname]
            if not allowed[i]:
                raise ScopeError(f"value constraint on {hid!r} conflicts with step {sname!r}")
            try:
                h.index(v)
            except ValueError:
                raise ScopeError(f"{v!r} not in domain of {hid}") from None
            full = _hp_id(sname, aname, h.name)
            if full in fixed and format_value(fixed[full]) != format_value(v):
                raise ScopeError(f"conflicting values for {full}")
            fixed[full] = h.values[h.index(v)]
        self._fixed = fixed
        # per path: list of per-hyperparameter candidate value tuples
        self._paths: list[tuple[Path, list[tuple]]] = []
        for combo in product(*allowed):
            domains = []
            for s, a in zip(space.steps, combo):
                for h in a.hyperparameters:
                    hid = _hp_id(s.name, a.name, h.name)
                    domains.append((fixed[hid],) if hid in fixed else h.values)
            self._paths.append((Path(tuple(a.name for a in combo)), domains))
        self._sizes = [math.prod(len(d) for d in doms) for _, doms in self._paths]
        self._offsets = np.concatenate([[0], np.cumsum(self._sizes)]).astype(np.int64)
        self.size = int(sum(self._sizes))
        self._path_pos = {p.algorithms: i for i, (p, _) in enumerate(self._paths)}

    def __len__(self) -> int:
        return self.size

    @property
    def paths(self) -> list[Path]:
        return [p for p, _ in self._paths]

    def unrank(self, r: int) -> Configuration:
        if not 0 <= r < self.size:
            raise IndexError(r)
        k = int(np.searchsorted(self._offsets, r, side="right")) - 1
        path, domains = self._paths[k]
        rem = r - int(self._offsets[k])
        flat = [None] * len(domains)
        for j in range(len(domains) - 1, -1, -1):
            rem, idx = divmod(rem, len(domains[j]))
            flat[j] = domains[j][idx]
        return _make_config(self.space, path, flat)

    def rank(self, config: Configuration) -> int:
        k = self._path_pos.get(config.path.algorithms)
        if k is None:
            raise ScopeError(f"{config.canonical_id} is outside the scope")
        _, domains = self._paths[k]
        r = 0
        for (hid, v), dom in zip(config.values, domains):
            key = format_value(v)
            pos = [format_value(d) for d in dom]
            if key not in pos:
                raise ScopeError(f"{config.canonical_id} is outside the scope")
            r = r * len(dom) + pos.index(key)
        return int(self._offsets[k]) + r

    def contains(self, config: Configuration) -> bool:
        try:
            self.rank(config)
        except ScopeError:
            return False
        return True

    def __iter__(self) -> Iterator[Configuration]:
        for path, domains in self._paths:
            for flat in product(*domains):
                yield _make_config(self.space, path, flat)


def _index(space: ConfigSpace, scope) -> ScopeIndex:
    if scope is None or isinstance(scope, Scope):
        return ScopeIndex(space, scope)
    if isinstance(scope, ScopeIndex):
        return scope
    if isinstance(scope, (Path, str, tuple, list)):
        return ScopeIndex(space, Scope.on_path(space, scope))
    raise ScopeError(f"unsupported scope {scope!r}")


def count_configurations(space: ConfigSpace, scope=None) -> int:
    """Exact number of configurations in ``scope`` (whole space by default).

    ``scope`` may be a :class:`Scope`, a path (``Path``, ``"A->C"``), or one of
    the helpers :func:`algorithm_scope` / :func:`hyperparameter_scope`, whose
    sizes are the algorithm's configuration count and the domain size.
    """
    return _index(space, scope).size


def enumerate_configurations(space: ConfigSpace, scope=None) -> list[Configuration]:
    return list(_index(space, scope))


def sample_configuration(space: ConfigSpace, scope, rng: np.random.Generator) -> Configuration:
    """Draw one configuration uniformly from the flattened scoped set."""
    index = _index(space, scope)
    if index.size == 0:
        raise ScopeError("empty scope")
    return index.unrank(int(rng.integers(index.size)))


def encode(space: ConfigSpace, config: Configuration) -> np.ndarray:
    """Fixed-width numeric vector for surrogate models.

    One slot per step holding the chosen algorithm's index, then one slot
    per hyperparameter of the whole space: the value's domain index scaled
    to [0, 1] when active, -1 when inactive.
    """
    vec = np.full(space.encoding_width, INACTIVE)
    _check_path(space, config.path)
    for i, (s, a) in enumerate(zip(space.steps, config.path.algorithms)):
        vec[i] = s.algorithm_index(a)
    offset = len(space.steps)
    slot_of = space._slot_of
    for hid, v in config.values:
        if hid not in slot_of:
            raise ScopeError(f"{hid} is not a hyperparameter of {space.name!r}")
        _, _, h = space.hyperparameter_slots[slot_of[hid]]
        vec[offset + slot_of[hid]] = h.index(v) / (h.size - 1) if h.size > 1 else 0.0
    return vec


def decode(space: ConfigSpace, vector: Sequence[float]) -> Configuration:
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (space.encoding_width,):
        raise ScopeError(f"expected width {space.encoding_width}, got {vector.shape}")
    algos = []
    for i, s in enumerate(space.steps):
        j = int(round(vector[i]))
        if not 0 <= j < len(s.algorithms) or j != vector[i]:
            raise ScopeError(f"bad algorithm index {vector[i]} for step {s.name!r}")
        algos.append(s.algorithms[j].name)
    path = Path(tuple(algos))
    offset = len(space.steps)
    flat = []
    for s, a in zip(space.steps, space.algorithms_of(path)):
        for h in a.hyperparameters:
            x = vector[offset + space._slot_of[_hp_id(s.name, a.name, h.name)]]
            idx = int(round(x * (h.size - 1))) if h.size > 1 else 0
            if x < 0 or idx >= h.size:
                raise ScopeError(f"inactive or out-of-range slot for {s.name}.{a.name}.{h.name}")
            flat.append(h.values[idx])
    return _make_config(space, path, flat)
