"""Statistics of a state: populations, quadrature squeezing, Mandel Q, g2, CSI.

Number statistics are read off the occupation distribution directly.
Quadrature statistics use the truncated ladder matrices, and the commutator
of the two quadratures is evaluated on the state rather than assumed to be
``i/2``, so truncation artefacts near the cutoff show up in the coefficients.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, UndefinedStatisticError
from .fock import SparseOperator, annihilation
from .states import StateVector

POPULATION_FLOOR = 1e-12


@dataclass(frozen=True)
class SqueezingReport:
    mode: str
    S1: float
    S2: float
    V1: float
    V2: float
    mean_G1: float
    mean_G2: float
    commutator: float  # |<[G1, G2]>|

    @property
    def squeezed(self) -> tuple[bool, bool]:
        return self.S1 < 0, self.S2 < 0


@dataclass(frozen=True)
class CorrelationReport:
    modes: tuple[str, str]
    g2_cross: float
    g2_auto_a: float
    g2_auto_b: float

    @property
    def csi_lhs(self) -> float:
        return self.g2_cross**2

    @property
    def csi_rhs(self) -> float:
        return self.g2_auto_a * self.g2_auto_b

    @property
    def csi_violated(self) -> bool:
        return self.csi_lhs > self.csi_rhs


def _moments(psi: StateVector, mode: str):
    p = psi.probabilities
    n = psi.basis.occupation(mode).astype(np.float64)
    return p, n


def population(psi: StateVector, mode: str) -> float:
    p, n = _moments(psi, mode)
    return float(p @ n)


def _require_population(value: float, what: str):
    if value < POPULATION_FLOOR:
        raise UndefinedStatisticError(f"{what} undefined: population {value:.3g} below {POPULATION_FLOOR}")


def mandel_q(psi: StateVector, mode: str) -> float:
    """``(<n^2> - <n>^2)/<n> - 1``, evaluated as ``<n(n-1)>/<n> - <n>``."""
    p, n = _moments(psi, mode)
    mean = float(p @ n)
    _require_population(mean, f"Mandel Q of {mode}")
    return float(p @ (n * (n - 1))) / mean - mean


def g2_auto(psi: StateVector, mode: str) -> float:
    p, n = _moments(psi, mode)
    mean = float(p @ n)
    _require_population(mean, f"g2 of {mode}")
    return float(p @ (n * (n - 1))) / mean**2


def g2_cross(psi: StateVector, mode_a: str, mode_b: str) -> float:
    if mode_a == mode_b:
        raise ConfigurationError("cross-correlation needs two distinct modes")
    p = psi.probabilities
    na = psi.basis.occupation(mode_a).astype(np.float64)
    nb = psi.basis.occupation(mode_b).astype(np.float64)
    ma, mb = float(p @ na), float(p @ nb)
    _require_population(ma, f"g2 of {mode_a},{mode_b}")
    _require_population(mb, f"g2 of {mode_a},{mode_b}")
    return float(p @ (na * nb)) / (ma * mb)


def csi_check(psi: StateVector, mode_a: str, mode_b: str) -> CorrelationReport:
    return CorrelationReport(
        (mode_a, mode_b),
        g2_cross(psi, mode_a, mode_b),
        g2_auto(psi, mode_a),
        g2_auto(psi, mode_b),
    )


def squeezing(psi: StateVector, mode: str) -> SqueezingReport:
    """Squeezing coefficients of ``G1 = (a + a^dag)/2`` and ``G2 = (a - a^dag)/2i``.

    ``S_i = (V_i - |<[G1,G2]>|/2) / (|<[G1,G2]>|/2)``, which is ``4 V_i - 1`` away
    from the truncation boundary.  ``S_i < 0`` marks a squeezed quadrature.
    """
    a = annihilation(psi.basis, mode).matrix
    v = psi.amplitudes
    av = a @ v
    adv = a.conj().T @ v
    g1v = 0.5 * (av + adv)
    g2v = -0.5j * (av - adv)
    m1 = float(np.vdot(v, g1v).real)
    m2 = float(np.vdot(v, g2v).real)
    var1 = float(np.vdot(g1v, g1v).real) - m1 * m1
    var2 = float(np.vdot(g2v, g2v).real) - m2 * m2
    # [G1, G2] = (i/2)[a, a^dag];  <[a, a^dag]> = |a^dag psi|^2 - |a psi|^2
    comm = 0.5 * abs(float(np.vdot(adv, adv).real - np.vdot(av, av).real))
    if comm < 1e-12:
        raise UndefinedStatisticError(f"quadrature commutator of {mode} vanishes on this state")
    half = 0.5 * comm
    return SqueezingReport(mode, (var1 - half) / half, (var2 - half) / half, var1, var2, m1, m2, comm)


@dataclass
class ObservableSeries:
    """Metric columns over a time grid."""

    times: np.ndarray
    columns: dict[str, np.ndarray] = field(default_factory=dict)
    scaled_times: np.ndarray | None = None

    def header(self) -> list[str]:
        head = ["time"]
        if self.scaled_times is not None:
            head.append("scaled_time")
        return head + list(self.columns)

    def rows(self) -> list[list[float]]:
        cols = [self.times]
        if self.scaled_times is not None:
            cols.append(self.scaled_times)
        cols += list(self.columns.values())
        return [[float(c[i]) for c in cols] for i in range(len(self.times))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for row in self.rows():
            w.writerow([_fmt(x) for x in row])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "columns": self.header(),
            "rows": [[None if math.isnan(x) else x for x in row] for row in self.rows()],
        }

    def column(self, name: str) -> np.ndarray:
        if name == "time":
            return self.times
        if name == "scaled_time" and self.scaled_times is not None:
            return self.scaled_times
        return self.columns[name]


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.12g}"


def parse_metric(metric: str) -> tuple[str, tuple[str, ...]]:
    name, _, args = metric.partition(":")
    modes = tuple(m.strip() for m in args.split(",") if m.strip()) if args else ()
    arity = METRIC_ARITY.get(name)
    if arity is None:
        raise ConfigurationError(f"unknown metric {metric!r}; known: {sorted(METRIC_ARITY)}")
    if len(modes) != arity:
        raise ConfigurationError(f"metric {name!r} takes {arity} mode(s), got {modes}")
    return name, modes


METRIC_ARITY = {
    "population": 1,
    "squeezing": 1,
    "mandel_q": 1,
    "g2_auto": 1,
    "g2_cross": 2,
    "csi": 2,
    "flux_ratio": 2,
    "charge": 0,
    "energy": 0,
    "norm": 0,
    "leakage": 0,
}


def _undefined_as_nan(fn, *args):
    try:
        return fn(*args)
    except UndefinedStatisticError:
        return math.nan


def metric_columns(psi: StateVector, metric: str, hamiltonian: SparseOperator | None = None) -> dict[str, float]:
    """Named scalar values of one metric on one state.

    Ratio statistics that are undefined on this state come back as NaN.
    """
    name, modes = parse_metric(metric)
    if name == "population":
        return {f"n_{modes[0]}": population(psi, modes[0])}
    if name == "squeezing":
        m = modes[0]
        try:
            rep = squeezing(psi, m)
            return {f"S1_{m}": rep.S1, f"S2_{m}": rep.S2}
        except UndefinedStatisticError:
            return {f"S1_{m}": math.nan, f"S2_{m}": math.nan}
    if name == "mandel_q":
        return {f"Q_{modes[0]}": _undefined_as_nan(mandel_q, psi, modes[0])}
    if name == "g2_auto":
        return {f"g2_{modes[0]}": _undefined_as_nan(g2_auto, psi, modes[0])}
    if name == "g2_cross":
        a, b = modes
        return {f"g2_{a}_{b}": _undefined_as_nan(g2_cross, psi, a, b)}
    if name == "csi":
        a, b = modes
        try:
            rep = csi_check(psi, a, b)
            return {
                f"csi_lhs_{a}_{b}": rep.csi_lhs,
                f"csi_rhs_{a}_{b}": rep.csi_rhs,
                f"csi_violated_{a}_{b}": float(rep.csi_violated),
            }
        except UndefinedStatisticError:
            return {f"csi_lhs_{a}_{b}": math.nan, f"csi_rhs_{a}_{b}": math.nan, f"csi_violated_{a}_{b}": math.nan}
    if name == "flux_ratio":
        a, b = modes
        den = population(psi, b)
        return {f"ratio_{a}_{b}": population(psi, a) / den if den >= POPULATION_FLOOR else math.nan}
    if name == "charge":
        return {"charge": float(psi.probabilities @ psi.basis.charges)}
    if name == "energy":
        if hamiltonian is None:
            raise ConfigurationError("the energy metric needs the Hamiltonian")
        return {"energy": psi.expect(hamiltonian).real}
    if name == "norm":
        return {"norm": psi.norm}
    return {"leakage": psi.leakage}


def series_report(states: Sequence[StateVector], grid, metrics: Sequence[str],
                  hamiltonian: SparseOperator | None = None, time_scale: float | None = None) -> ObservableSeries:
    """Tabulate ``metrics`` for each state; ``time_scale`` adds a scaled-time column."""
    times = np.asarray(getattr(grid, "times", grid), dtype=np.float64)
    if len(states) != len(times):
        raise ConfigurationError(f"{len(states)} states for {len(times)} grid times")
    for m in metrics:
        parse_metric(m)
    columns: dict[str, list[float]] = {}
    for psi in states:
        for m in metrics:
            for key, val in metric_columns(psi, m, hamiltonian).items():
                columns.setdefault(key, []).append(val)
    scaled = times * time_scale if time_scale is not None else None
    return ObservableSeries(times, {k: np.array(v) for k, v in columns.items()}, scaled)


def series_to_json_text(series: ObservableSeries, **extra) -> str:
    payload = dict(extra)
    payload["series"] = series.to_json()
    return json.dumps(payload, indent=2)
