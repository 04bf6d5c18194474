"""Hamiltonians of the atom-molecule output coupler.

Three models share the Fock machinery:

* five modes ``c, e, b, m, g``: condensate, excited atoms, output atoms,
  excited molecules, output molecules, with detuned intermediate states;
* three modes ``c, b, g`` after adiabatic elimination of ``e`` and ``m``;
* four linear modes ``a1, a2, b, g`` with quantized input lights.

All couplings are real and hbar = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError
from .fock import (
    FockBasis,
    ModeSet,
    SparseOperator,
    TruncationSpec,
    build_basis,
    check_hermitian,
    monomial,
)

FIVE_MODES = ModeSet(("c", "e", "b", "m", "g"), (1, 1, 1, 2, 2))
THREE_MODES = ModeSet(("c", "b", "g"), (1, 1, 2))
FOUR_MODES = ModeSet(("a1", "a2", "b", "g"), (1, 1, 1, 1))


def _finite(**values):
    for name, v in values.items():
        if not math.isfinite(v):
            raise ConfigurationError(f"{name} must be finite, got {v}")


@dataclass(frozen=True)
class FiveModeParams:
    epsilon1: float
    epsilon2: float
    omega1: float
    omega2: float
    delta1: float
    delta2: float

    def __post_init__(self):
        _finite(**{k: float(getattr(self, k)) for k in self.__dataclass_fields__})
        if self.delta1 == 0 or self.delta2 == 0:
            raise ConfigurationError("detunings must be nonzero for adiabatic elimination")

    @classmethod
    def from_effective(cls, lambda1: float, lambda2: float, delta1: float, delta2: float | None = None):
        """Microscopic couplings with ``epsilon_i = omega_i`` reproducing ``lambda_i``.

        ``|epsilon_i| = |omega_i| = sqrt(|lambda_i delta_i|)``; the sign goes on
        ``epsilon_i``.  Equal input and control couplings keep the light shifts of
        ``c`` and ``b`` equal, so the atomic Raman transition stays resonant.
        """
        delta2 = delta1 if delta2 is None else delta2
        if delta1 == 0 or delta2 == 0:
            raise ConfigurationError("detunings must be nonzero for adiabatic elimination")

        def split(lam, delta):
            mag = math.sqrt(abs(lam * delta))
            return math.copysign(mag, lam * delta), mag

        e1, o1 = split(lambda1, delta1)
        e2, o2 = split(lambda2, delta2)
        return cls(e1, e2, o1, o2, float(delta1), float(delta2))


@dataclass(frozen=True)
class ThreeModeParams:
    lambda1: float
    lambda2: float

    def __post_init__(self):
        _finite(lambda1=float(self.lambda1), lambda2=float(self.lambda2))

    @property
    def eta(self) -> float:
        """Coupling-strength ratio ``(lambda2 / lambda1)**2``."""
        if self.lambda1 == 0:
            raise ConfigurationError("eta is undefined for lambda1 = 0")
        return (self.lambda2 / self.lambda1) ** 2


@dataclass(frozen=True)
class FourModeParams:
    lambda1p: float
    lambda2p: float
    n0: float | None = None

    def __post_init__(self):
        _finite(lambda1p=float(self.lambda1p), lambda2p=float(self.lambda2p))
        if self.n0 is not None and not self.n0 > 0:
            raise ConfigurationError("n0 must be positive")

    @classmethod
    def from_three_mode(cls, p: ThreeModeParams, n0: float) -> "FourModeParams":
        if not n0 > 0:
            raise ConfigurationError("n0 must be positive")
        root = math.sqrt(n0)
        return cls(p.lambda1 * root, p.lambda2 * root, float(n0))


def effective_params(p: FiveModeParams) -> ThreeModeParams:
    """``lambda_i = epsilon_i * omega_i / delta_i``."""
    if p.delta1 == 0 or p.delta2 == 0:
        raise ConfigurationError("zero detuning")
    return ThreeModeParams(p.epsilon1 * p.omega1 / p.delta1, p.epsilon2 * p.omega2 / p.delta2)


def _require_modes(basis: FockBasis, expected: ModeSet, name: str):
    if basis.modes != expected:
        raise ConfigurationError(
            f"{name} needs modes {expected.labels} with weights {expected.charge_weights}, "
            f"got {basis.modes.labels} with {basis.modes.charge_weights}"
        )


def _hop(basis, up: str, down: str) -> SparseOperator:
    """``up^dag down + h.c.``"""
    op = monomial(basis, {up: (1, 0), down: (0, 1)})
    return op + op.dag()


def _pair(basis, single: str, pair: str) -> SparseOperator:
    """``single^dag pair pair + h.c.``"""
    op = monomial(basis, {single: (1, 0), pair: (0, 2)})
    return op + op.dag()


def _finish(basis, terms) -> SparseOperator:
    total = sp.csr_matrix((basis.dim, basis.dim), dtype=np.complex128)
    for coeff, op in terms:
        if coeff != 0:
            total = total + coeff * op.matrix
    h = SparseOperator(basis, total)
    if not check_hermitian(h, 1e-12):
        raise ConfigurationError("constructed Hamiltonian is not Hermitian")
    h.hermitian_hint = True
    return h


def build_h5(basis: FockBasis, p: FiveModeParams) -> SparseOperator:
    _require_modes(basis, FIVE_MODES, "build_h5")
    n = lambda lab: monomial(basis, {lab: (1, 1)})
    return _finish(
        basis,
        [
            (-p.delta1, n("e")),
            (-p.delta2, n("m")),
            (p.epsilon1, _hop(basis, "e", "c")),
            (p.omega1, _hop(basis, "b", "e")),
            (p.epsilon2, _pair(basis, "m", "c")),
            (p.omega2, _hop(basis, "g", "m")),
        ],
    )


def build_h3(basis: FockBasis, p: ThreeModeParams) -> SparseOperator:
    _require_modes(basis, THREE_MODES, "build_h3")
    return _finish(basis, [(p.lambda1, _hop(basis, "b", "c")), (p.lambda2, _pair(basis, "g", "c"))])


def build_h4(basis: FockBasis, p: FourModeParams) -> SparseOperator:
    _require_modes(basis, FOUR_MODES, "build_h4")
    return _finish(basis, [(p.lambda1p, _hop(basis, "b", "a1")), (p.lambda2p, _hop(basis, "g", "a2"))])


def charge_operator(basis: FockBasis, weights=None) -> SparseOperator:
    """Diagonal ``sum_i w_i n_i``; ``weights`` default to the basis charge weights."""
    if weights is None:
        diag = basis.charges
    else:
        diag = basis.occupations @ np.asarray(weights, dtype=np.int64)
    return SparseOperator(basis, sp.diags(diag.astype(np.complex128), format="csr"), hermitian_hint=True)


def channel_charges(basis: FockBasis) -> tuple[SparseOperator, SparseOperator]:
    """The two separately conserved numbers of the four-mode model."""
    _require_modes(basis, FOUR_MODES, "channel_charges")
    return charge_operator(basis, (1, 0, 1, 0)), charge_operator(basis, (0, 1, 0, 1))


def three_mode_basis(cutoff: int, output_cutoff: int | None = None, charge_cutoff: int | None = None) -> FockBasis:
    """Basis over ``c, b, g``.

    ``cutoff`` bounds the condensate; ``output_cutoff`` bounds ``b`` (``g`` gets
    half of it, being weight 2).  The charge cutoff defaults to ``cutoff``.
    """
    out = cutoff if output_cutoff is None else output_cutoff
    charge = cutoff if charge_cutoff is None else charge_cutoff
    return build_basis(THREE_MODES, TruncationSpec({"c": cutoff, "b": out, "g": out // 2}, charge))


def five_mode_basis(cutoff: int, charge_cutoff: int | None = None) -> FockBasis:
    charge = cutoff if charge_cutoff is None else charge_cutoff
    half = cutoff // 2
    return build_basis(FIVE_MODES, TruncationSpec({"c": cutoff, "e": cutoff, "b": cutoff, "m": half, "g": half}, charge))


def four_mode_basis(cutoff: int, paired: bool = True) -> FockBasis:
    """Basis over ``a1, a2, b, g`` with each channel number ``<= cutoff``.

    ``paired`` restricts to ``n_a1 + n_b = n_a2 + n_g``, the sector reached by a
    two-mode squeezed vacuum in ``a1, a2``.  Only number-diagonal statistics are
    meaningful on the paired basis.
    """
    cons = [((1, 0, 1, 0), cutoff), ((0, 1, 0, 1), cutoff)]
    if paired:
        cons += [((1, -1, 1, -1), 0), ((-1, 1, -1, 1), 0)]
    return build_basis(FOUR_MODES, TruncationSpec(cutoff, 2 * cutoff, tuple(cons)))
