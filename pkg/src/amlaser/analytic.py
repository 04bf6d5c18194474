"""Short-time closed forms for the three- and four-mode models.

The formulas are transcribed as published, including coefficients that
exact evolution does not reproduce; :func:`compare` and
:func:`compare_series` measure the disagreement instead of correcting it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, UndefinedStatisticError

SQUEEZE_THRESHOLD_R = math.log(1.0 + math.sqrt(2.0))


@dataclass(frozen=True)
class ShortTimePrediction:
    quantity: str
    value: float
    validity: str
    source: str
    params: dict = field(default_factory=dict, compare=False, hash=False)


def flux_coherent(alpha_mag: float, lambda1: float, lambda2: float, t: float) -> tuple[float, float]:
    """Leading-order output populations for a coherent condensate."""
    if np.any(np.asarray(t) < 0):
        raise ConfigurationError("t must be >= 0")
    a2 = alpha_mag**2
    return lambda1**2 * t**2 * a2, lambda2**2 * t**2 * a2**2


def flux_ratio_squeezed(r: float, eta: float) -> float:
    """``<N_g>/<N_b> = eta (1 + 3 sinh^2 r)`` for a squeezed-vacuum condensate."""
    if r <= 0:
        raise UndefinedStatisticError("flux ratio undefined at r = 0: both output fluxes vanish")
    return eta * (1.0 + 3.0 * math.sinh(r) ** 2)


def squeeze_coeffs_coherent(alpha_mag, phi, lambda1, lambda2, t) -> tuple[float, float, float, float]:
    """``(S1a, S2a, S1g, S2g)`` for a coherent condensate, as published."""
    a2 = alpha_mag**2
    sa = 3.0 * a2 * lambda1**2 * t**2
    sg = a2**2 * lambda2**2 * t**2
    return (
        sa * math.sin(phi) ** 2,
        sa * math.cos(phi) ** 2,
        sg * math.sin(2 * phi) ** 2,
        sg * math.cos(2 * phi) ** 2,
    )


def squeeze_coeffs_squeezed_input(r, phi_s, lambda1, lambda2, t) -> tuple[float, float, float, float]:
    """``(S1b, S2b, S1g, S2g)`` for a squeezed-vacuum condensate, as published."""
    if r < 0 or t < 0:
        raise ConfigurationError("need r >= 0 and t >= 0")
    sh, ch = math.sinh(r), math.cosh(r)
    pref = 2.0 * lambda1**2 * t**2 * sh
    tau = lambda2 * t * sh
    c2 = math.cos(phi_s) ** 2
    s2 = math.sin(phi_s) ** 2
    return (
        pref * (sh + ch * math.cos(phi_s)),
        pref * (sh - ch * math.cos(phi_s)),
        tau**2 * (11.0 * (sh**2 + 1.0) * c2 - 4.0),
        tau**2 * (11.0 * (sh**2 + 1.0) * s2 - 4.0),
    )


@dataclass(frozen=True)
class SqueezingRegime:
    case: str  # "i", "ii", "iii", "iv" or "generic"
    squeezed: frozenset[str]


COMPONENTS = ("S1b", "S2b", "S1g", "S2g")


def _near_multiple(x: float, period: float, offset: float, atol: float) -> bool:
    k = (x - offset) / period
    return abs(k - round(k)) * period <= atol


def classify_squeezing_regime(phi_s: float, r: float, atol: float = 1e-9) -> SqueezingRegime:
    """Which output quadratures the published formulas call squeezed.

    The four special angle families carry the published verdicts; any other
    angle is classified from the signs of :func:`squeeze_coeffs_squeezed_input`.
    """
    if r <= 0:
        raise ConfigurationError("classification needs r > 0")
    pi = math.pi
    if _near_multiple(phi_s, 2 * pi, 0.0, atol):
        return SqueezingRegime("i", frozenset({"S2b", "S2g"}))
    if _near_multiple(phi_s, 2 * pi, pi, atol):
        return SqueezingRegime("ii", frozenset({"S1b", "S2g"}))
    if _near_multiple(phi_s, pi, pi / 2, atol):
        return SqueezingRegime("iii", frozenset({"S1g"}))
    if _near_multiple(phi_s, pi, pi / 4, atol):
        atomic = "S2b" if math.cos(phi_s) > 0 else "S1b"
        return SqueezingRegime("iv", frozenset({atomic}) if r < SQUEEZE_THRESHOLD_R else frozenset())
    signs = squeeze_coeffs_squeezed_input(r, phi_s, 1.0, 1.0, 1.0)
    return SqueezingRegime("generic", frozenset(n for n, v in zip(COMPONENTS, signs) if v < 0))


def g2_fourmode_tmsv(kappa: float) -> float:
    """``2 + 1/sinh^2 kappa`` after complete transfer of a two-mode squeezed vacuum."""
    if kappa <= 0:
        raise UndefinedStatisticError("g2 undefined at kappa = 0: the vacuum carries no flux")
    return 2.0 + 1.0 / math.sinh(kappa) ** 2


@dataclass(frozen=True)
class TolerancePolicy:
    rel_tol: float = 0.02
    abs_tol: float = 0.0
    report_only: bool = False
    min_residual_order: float | None = None


@dataclass
class DiscrepancyReport:
    quantity: str
    params: dict
    paper_value: float | list
    numeric_value: float | list
    abs_err: float
    rel_err: float
    passed: bool | None
    residual_order: float | None = None
    note: str = ""

    def to_json(self) -> dict:
        return {
            "quantity": self.quantity,
            "params": self.params,
            "paper_value": self.paper_value,
            "numeric_value": self.numeric_value,
            "abs_err": self.abs_err,
            "rel_err": self.rel_err,
            "passed": self.passed,
            "residual_order": self.residual_order,
            "note": self.note,
        }


def _rel(abs_err: float, ref: float) -> float:
    if ref == 0:
        return 0.0 if abs_err == 0 else math.inf
    return abs_err / abs(ref)


def compare(prediction: ShortTimePrediction, numeric: float, policy: TolerancePolicy | None = None) -> DiscrepancyReport:
    policy = policy or TolerancePolicy()
    err = abs(numeric - prediction.value)
    rel = _rel(err, prediction.value)
    ok = err <= policy.abs_tol or rel <= policy.rel_tol
    return DiscrepancyReport(
        prediction.quantity,
        dict(prediction.params),
        prediction.value,
        float(numeric),
        err,
        rel,
        None if policy.report_only else bool(ok),
        note=prediction.validity,
    )


def residual_order(times, predicted, numeric) -> float:
    """Slope of ``log|numeric - predicted|`` against ``log t``."""
    t = np.asarray(times, dtype=np.float64)
    res = np.abs(np.asarray(numeric, dtype=np.float64) - np.asarray(predicted, dtype=np.float64))
    if np.any(t <= 0) or np.any(res <= 0):
        raise UndefinedStatisticError("residual order needs positive times and nonzero residuals")
    slope, _ = np.polyfit(np.log(t), np.log(res), 1)
    return float(slope)


def compare_series(quantity: str, times, predicted, numeric, policy: TolerancePolicy | None = None,
                   params: dict | None = None) -> DiscrepancyReport:
    """Compare a t-series; the report carries the fitted residual order.

    Pass/fail uses the relative error at the largest time and, when the policy
    sets ``min_residual_order``, the fitted order.
    """
    policy = policy or TolerancePolicy()
    pred = np.asarray(predicted, dtype=np.float64)
    num = np.asarray(numeric, dtype=np.float64)
    err = np.abs(num - pred)
    k = int(np.argmax(np.asarray(times)))
    rel = _rel(float(err[k]), float(pred[k]))
    try:
        order = residual_order(times, pred, num)
    except UndefinedStatisticError:
        order = None
    ok = rel <= policy.rel_tol or float(err[k]) <= policy.abs_tol
    if policy.min_residual_order is not None:
        ok = ok and order is not None and order >= policy.min_residual_order
    return DiscrepancyReport(
        quantity,
        dict(params or {}),
        pred.tolist(),
        num.tolist(),
        float(err.max()),
        rel,
        None if policy.report_only else bool(ok),
        order,
    )
