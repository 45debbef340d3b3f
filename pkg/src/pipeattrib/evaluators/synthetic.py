"""Deterministic synthetic loss surface over a configuration space.

    loss = intercept + sum_s weight_s * (base_a + sum_h amplitude_h * (u_h - u*_h)^2)

where ``a`` is the algorithm chosen for step ``s``, ``u_h`` is the chosen
value's domain index scaled to [0, 1] and ``u*_h`` the scaled index of the
hyperparameter's optimum.  Optional Gaussian noise is seeded by the noise
seed and the configuration's canonical id, so repeated calls agree.
"""
from __future__ import annotations

import json
import zlib
from importlib import resources

import numpy as np

from ..config_space import ConfigSpace, Configuration


def fig3_coefficients() -> dict:
    text = resources.files("pipeattrib.data").joinpath("fig3_synth.json").read_text(encoding="utf-8")
    return json.loads(text)


def _scaled(h, value) -> float:
    return h.index(value) / (h.size - 1) if h.size > 1 else 0.0


class SyntheticSurface:
    def __init__(self, space: ConfigSpace, coefficients: dict | None = None, noise_std: float = 0.0, noise_seed: int = 0):
        coefficients = coefficients if coefficients is not None else fig3_coefficients()
        self.space = space
        self.intercept = float(coefficients.get("intercept", 0.0))
        self.noise_std = float(noise_std)
        self.noise_seed = int(noise_seed)
        # (step, algorithm) -> (weighted base, [(hp id, weight*amplitude, optimum index scaled)])
        self._terms: dict[tuple[str, str], tuple[float, list]] = {}
        steps = coefficients.get("steps", {})
        for s in space.steps:
            if s.name not in steps:
                raise ValueError(f"no coefficients for step {s.name!r}")
            w = float(steps[s.name]["weight"])
            algos = steps[s.name]["algorithms"]
            for a in s.algorithms:
                if a.name not in algos:
                    raise ValueError(f"no coefficients for {s.name}.{a.name}")
                spec = algos[a.name]
                hps = spec.get("hyperparameters", {})
                terms = []
                for h in a.hyperparameters:
                    if h.name not in hps:
                        raise ValueError(f"no coefficients for {s.name}.{a.name}.{h.name}")
                    c = hps[h.name]
                    terms.append((f"{s.name}.{a.name}.{h.name}", w * float(c["amplitude"]), _scaled(h, c["optimum"])))
                self._terms[(s.name, a.name)] = (w * float(spec["base"]), terms)

    def noiseless(self, config: Configuration) -> float:
        values = config.assignments
        loss = self.intercept
        for s, a in zip(self.space.steps, config.path.algorithms):
            base, terms = self._terms[(s.name, a)]
            loss += base
            for hid, amp, opt in terms:
                _, _, h = self.space.resolve_hyperparameter(hid)
                loss += amp * (_scaled(h, values[hid]) - opt) ** 2
        return loss

    def __call__(self, config: Configuration) -> float:
        loss = self.noiseless(config)
        if self.noise_std > 0:
            key = zlib.crc32(config.canonical_id.encode("utf-8"))
            rng = np.random.default_rng([self.noise_seed, key])
            loss += self.noise_std * float(rng.standard_normal())
        return loss
