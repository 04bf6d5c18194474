"""Five-mode versus three-mode convergence along a detuning ladder.

For each ``delta/lambda1`` on the ladder the microscopic couplings are set to
``|epsilon_i| = |omega_i| = sqrt(lambda_i delta_i)`` so the effective couplings
stay fixed, and the output population ``<n_b>`` of the five-mode run is
compared with a reference three-mode run over the same window.

``reference = "three-mode"`` is the bare effective Hamiltonian.
``reference = "full-effective"`` adds the second-order level shifts and the
condensate collision term that the bare form drops; it isolates the part of
the deviation that actually shrinks with detuning.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..fock import monomial
from ..models import FiveModeParams, ThreeModeParams, build_h3, build_h5, five_mode_basis, three_mode_basis
from ..observables import population
from ..propagator import EvolveConfig, Propagator, TimeGrid
from ..states import CoherentSpec, prepare
from .config import _check_keys, _check_schema, _number

REFERENCES = ("three-mode", "full-effective")


@dataclass(frozen=True)
class AdiabaticConfig:
    lambda1: float = 1.0
    lambda2: float = 1.0
    alpha: float = 2.0
    ladder: tuple[float, ...] = (10.0, 20.0, 40.0, 80.0)
    t_max: float = 0.5
    n_steps: int = 800
    charge_cutoff: int = 12
    reference: str = "three-mode"
    ratio_bounds: tuple[float, float] = (1.5, 3.0)

    def __post_init__(self):
        if self.lambda1 <= 0:
            raise ConfigurationError("lambda1 must be > 0")
        if len(self.ladder) < 2 or any(r <= 0 for r in self.ladder):
            raise ConfigurationError("ladder needs at least two positive detuning ratios")
        if list(self.ladder) != sorted(self.ladder):
            raise ConfigurationError("ladder must be increasing")
        if self.reference not in REFERENCES:
            raise ConfigurationError(f"reference must be one of {REFERENCES}")
        if not self.t_max > 0 or self.n_steps < 1 or self.charge_cutoff < 1:
            raise ConfigurationError("need t_max > 0, n_steps >= 1 and charge_cutoff >= 1")


def parse_adiabatic(data: dict) -> AdiabaticConfig:
    _check_schema(data, "validate-adiabatic")
    keys = set(AdiabaticConfig.__dataclass_fields__)
    _check_keys(data, keys | {"schema_version", "name", "output"}, "validate-adiabatic")
    kw = {}
    for k in ("lambda1", "lambda2", "alpha", "t_max"):
        if k in data:
            kw[k] = _number(data, k, "validate-adiabatic")
    for k in ("n_steps", "charge_cutoff"):
        if k in data:
            kw[k] = int(data[k])
    if "ladder" in data:
        kw["ladder"] = tuple(float(x) for x in data["ladder"])
    if "ratio_bounds" in data:
        lo, hi = data["ratio_bounds"]
        kw["ratio_bounds"] = (float(lo), float(hi))
    if "reference" in data:
        kw["reference"] = data["reference"]
    return AdiabaticConfig(**kw)


def full_effective_hamiltonian(basis, p: FiveModeParams):
    """Bare three-mode Hamiltonian plus the dropped second-order terms."""
    lam = ThreeModeParams(p.epsilon1 * p.omega1 / p.delta1, p.epsilon2 * p.omega2 / p.delta2)
    h = build_h3(basis, lam)
    h = h + (p.epsilon1**2 / p.delta1) * monomial(basis, {"c": (1, 1)})
    h = h + (p.omega1**2 / p.delta1) * monomial(basis, {"b": (1, 1)})
    h = h + (p.epsilon2**2 / p.delta2) * monomial(basis, {"c": (2, 2)})
    h = h + (p.omega2**2 / p.delta2) * monomial(basis, {"g": (1, 1)})
    h.hermitian_hint = True
    return h


def _nb_series(h, basis, alpha, grid) -> np.ndarray:
    psi0 = prepare(basis, [CoherentSpec("c", alpha)])
    states = Propagator(h, EvolveConfig()).series(psi0, grid)
    return np.array([population(s, "b") for s in states])


def validate_adiabatic(cfg: AdiabaticConfig) -> dict:
    grid = TimeGrid.linear(cfg.t_max / cfg.lambda1, cfg.n_steps)
    b3 = three_mode_basis(cfg.charge_cutoff)
    b5 = five_mode_basis(cfg.charge_cutoff)
    lam = ThreeModeParams(cfg.lambda1, cfg.lambda2)
    bare = _nb_series(build_h3(b3, lam), b3, cfg.alpha, grid) if cfg.reference == "three-mode" else None
    rows = []
    prev = None
    for ratio in cfg.ladder:
        p = FiveModeParams.from_effective(cfg.lambda1, cfg.lambda2, ratio * cfg.lambda1)
        ref = bare if bare is not None else _nb_series(full_effective_hamiltonian(b3, p), b3, cfg.alpha, grid)
        nb5 = _nb_series(build_h5(b5, p), b5, cfg.alpha, grid)
        dev = float(np.max(np.abs(nb5 - ref)))
        rows.append({
            "delta_over_lambda": ratio,
            "max_deviation": dev,
            "ratio_to_previous": None if prev is None else (prev / dev if dev > 0 else math.inf),
        })
        prev = dev
    devs = [r["max_deviation"] for r in rows]
    ratios = [r["ratio_to_previous"] for r in rows[1:]]
    lo, hi = cfg.ratio_bounds
    monotone = all(b < a for a, b in zip(devs, devs[1:]))
    in_bounds = all(lo <= q <= hi for q in ratios)
    return {
        "metadata": {
            "reference": cfg.reference,
            "lambda1": cfg.lambda1,
            "lambda2": cfg.lambda2,
            "alpha": cfg.alpha,
            "t_max_scaled": cfg.t_max,
            "n_steps": cfg.n_steps,
            "charge_cutoff": cfg.charge_cutoff,
            "basis_dim": {"five": b5.dim, "three": b3.dim},
        },
        "rows": rows,
        "monotone": monotone,
        "ratios_in_bounds": in_bounds,
        "passed": monotone and in_bounds,
    }
