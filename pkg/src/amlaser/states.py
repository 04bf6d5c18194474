"""Initial states on a truncated basis.

Every preparation renormalizes after truncation and records the probability
mass of the ideal state that fell outside the basis as ``norm_deficit``.
Squeezed states are produced by exponentiating the squeeze generator
``xi (a^dag)^2 - xi^* a^2`` (or its two-mode analogue) on an auxiliary
single-mode space that is padded until the tail is negligible.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import ConfigurationError
from .fock import FockBasis, ModeSet, SparseOperator, TruncationSpec, build_basis

DEFAULT_DEFICIT_BAR = 1e-8
DEFAULT_MOMENT_BAR = 1e-6
TRUNCATION_FLAG = "truncation"
LEAKAGE_FLAG = "leakage"


@dataclass(frozen=True)
class CoherentSpec:
    mode: str
    magnitude: float
    phase: float = 0.0

    def __post_init__(self):
        if self.magnitude < 0:
            raise ConfigurationError("coherent magnitude must be >= 0")

    @property
    def alpha(self) -> complex:
        return self.magnitude * cmath.exp(1j * self.phase)


@dataclass(frozen=True)
class SqueezeSpec:
    """Squeeze strength ``r`` and angle ``phi_s``; ``xi = (r/2) exp(-i phi_s)``."""

    mode: str
    r: float
    angle: float = 0.0
    displacement: CoherentSpec | None = None

    def __post_init__(self):
        if self.r < 0:
            raise ConfigurationError("squeeze strength must be >= 0")
        if self.displacement is not None and self.displacement.mode != self.mode:
            raise ConfigurationError("displacement must act on the squeezed mode")

    @property
    def xi(self) -> complex:
        return 0.5 * self.r * cmath.exp(-1j * self.angle)


@dataclass(frozen=True)
class TwoModeSqueezeSpec:
    """Two-mode squeezing ``zeta = kappa exp(-i theta_s)`` on ``modes``."""

    modes: tuple[str, str]
    kappa: float
    angle: float = 0.0

    def __post_init__(self):
        modes = tuple(self.modes)
        if len(modes) != 2 or modes[0] == modes[1]:
            raise ConfigurationError("two-mode squeezing needs two distinct modes")
        if self.kappa < 0:
            raise ConfigurationError("kappa must be >= 0")
        object.__setattr__(self, "modes", modes)

    @property
    def zeta(self) -> complex:
        return self.kappa * cmath.exp(-1j * self.angle)


class StateVector:
    """Normalized amplitudes over a basis plus truncation bookkeeping."""

    __slots__ = ("basis", "amplitudes", "norm_deficit", "leakage", "flags")

    def __init__(self, basis: FockBasis, amplitudes, norm_deficit: float = 0.0, leakage: float = 0.0, flags=()):
        amp = np.array(amplitudes, dtype=np.complex128)
        if amp.shape != (basis.dim,):
            raise ConfigurationError(f"amplitude vector of shape {amp.shape} for basis dimension {basis.dim}")
        amp.setflags(write=False)
        self.basis = basis
        self.amplitudes = amp
        self.norm_deficit = max(0.0, float(norm_deficit))
        self.leakage = float(leakage)
        self.flags = tuple(sorted(set(flags)))

    def __repr__(self):
        return f"StateVector(dim={self.basis.dim}, deficit={self.norm_deficit:.3g}, flags={self.flags})"

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def expect(self, op: SparseOperator) -> complex:
        return op.expect(self.amplitudes)

    def to_json(self, threshold: float = 0.0) -> list:
        """``[occupation, re, im]`` rows for amplitudes above ``threshold``."""
        rows = []
        for i in np.flatnonzero(np.abs(self.amplitudes) > threshold):
            a = self.amplitudes[i]
            rows.append([list(self.basis.states[i]), float(a.real), float(a.imag)])
        return rows


def _finish(basis, amp, deficit, flags=(), threshold=DEFAULT_DEFICIT_BAR) -> StateVector:
    norm = np.linalg.norm(amp)
    if norm == 0:
        raise ConfigurationError("state has no weight inside the basis")
    flags = set(flags)
    if deficit > threshold:
        flags.add(TRUNCATION_FLAG)
    return StateVector(basis, amp / norm, deficit, flags=flags)


def _embed_single(basis: FockBasis, mode: str, amps: np.ndarray, tail: float, threshold: float) -> StateVector:
    """Place single-mode amplitudes on ``mode`` with every other mode empty.

    ``amps`` are the ideal amplitudes for n = 0..len-1 and ``tail`` the ideal mass
    beyond; entries that the basis does not admit add to the deficit.
    """
    i = basis.mode_index(mode)
    occ = np.zeros((len(amps), len(basis.modes)), dtype=np.int64)
    occ[:, i] = np.arange(len(amps))
    idx = basis.lookup(occ)
    inside = idx >= 0
    vec = np.zeros(basis.dim, dtype=np.complex128)
    vec[idx[inside]] = amps[inside]
    deficit = tail + float(np.sum(np.abs(amps[~inside]) ** 2))
    return _finish(basis, vec, deficit, threshold=threshold)


def _coherent_amplitudes(alpha: complex, nmax: int) -> np.ndarray:
    n = np.arange(nmax + 1)
    mag = abs(alpha)
    if mag == 0:
        out = np.zeros(nmax + 1, dtype=np.complex128)
        out[0] = 1.0
        return out
    logmag = n * math.log(mag) - 0.5 * gammaln(n + 1) - 0.5 * mag * mag
    return np.exp(logmag) * np.exp(1j * n * cmath.phase(alpha))


def fock(basis: FockBasis, occupation) -> StateVector:
    """Number state; ``occupation`` is a tuple in mode order or a label -> n mapping."""
    vec = np.zeros(basis.dim, dtype=np.complex128)
    vec[basis.index_of(occupation)] = 1.0
    return StateVector(basis, vec)


def vacuum(basis: FockBasis) -> StateVector:
    return fock(basis, (0,) * len(basis.modes))


def coherent(basis: FockBasis, spec: CoherentSpec, threshold: float = DEFAULT_DEFICIT_BAR) -> StateVector:
    """Glauber state on ``spec.mode``, other modes in vacuum."""
    nmax = basis.cutoffs[basis.mode_index(spec.mode)]
    amps = _coherent_amplitudes(spec.alpha, nmax)
    tail = float(poisson.sf(nmax, spec.magnitude**2)) if spec.magnitude > 0 else 0.0
    return _embed_single(basis, spec.mode, amps, tail, threshold)


def _padded_evolution(generator_of, start_of, nmax: int, max_dim: int = 8192):
    """Apply ``expm(G)`` on a padded space until the top of the space is empty.

    ``generator_of(d)`` returns the dense generator on ``d`` levels and
    ``start_of(d)`` the start vector.  Returns the padded result.
    """
    d = 2 * (nmax + 1) + 32
    while True:
        psi = la.expm(generator_of(d)) @ start_of(d)
        top = float(np.sum(np.abs(psi[-max(8, d // 8):]) ** 2))
        if top < 1e-24:
            return psi
        if d >= max_dim:
            raise ConfigurationError("squeezing too strong to resolve on the auxiliary space")
        d *= 2


def _single_mode_squeezed(xi: complex, alpha: complex, nmax: int) -> np.ndarray:
    def generator(d):
        a = np.diag(np.sqrt(np.arange(1, d)), 1)
        a2 = a @ a
        return xi * a2.conj().T - np.conj(xi) * a2

    return _padded_evolution(generator, lambda d: _coherent_amplitudes(alpha, d - 1), nmax)


def squeezed(basis: FockBasis, spec: SqueezeSpec, threshold: float = DEFAULT_DEFICIT_BAR) -> StateVector:
    """``S(xi)|alpha>`` on ``spec.mode``; deficit above ``threshold`` sets a flag."""
    nmax = basis.cutoffs[basis.mode_index(spec.mode)]
    alpha = spec.displacement.alpha if spec.displacement is not None else 0j
    if spec.r == 0:
        disp = spec.displacement or CoherentSpec(spec.mode, 0.0)
        return coherent(basis, disp, threshold)
    psi = _single_mode_squeezed(spec.xi, alpha, nmax)
    tail = float(np.sum(np.abs(psi[nmax + 1 :]) ** 2))
    return _embed_single(basis, spec.mode, psi[: nmax + 1], tail, threshold)


def two_mode_squeezed_vacuum(
    basis: FockBasis, spec: TwoModeSqueezeSpec, threshold: float = DEFAULT_DEFICIT_BAR
) -> StateVector:
    """``exp(zeta a1^dag a2^dag - zeta^* a1 a2)|0,0>``, other modes in vacuum.

    The generator keeps the pair diagonal ``|n,n>`` invariant
    (``a1^dag a2^dag |n,n> = (n+1)|n+1,n+1>``), so it is exponentiated on that
    chain alone.
    """
    m1, m2 = spec.modes
    i1, i2 = basis.mode_index(m1), basis.mode_index(m2)
    nmax = min(basis.cutoffs[i1], basis.cutoffs[i2])
    zeta = spec.zeta

    def generator(d):
        up = np.diag(np.arange(1, d, dtype=np.float64), -1)
        return zeta * up - np.conj(zeta) * up.T

    def start(d):
        v = np.zeros(d, dtype=np.complex128)
        v[0] = 1.0
        return v

    if spec.kappa == 0:
        psi = start(nmax + 1)
    else:
        psi = _padded_evolution(generator, start, nmax)
    tail = float(np.sum(np.abs(psi[nmax + 1 :]) ** 2))
    amps = psi[: nmax + 1]
    occ = np.zeros((len(amps), len(basis.modes)), dtype=np.int64)
    occ[:, i1] = np.arange(len(amps))
    occ[:, i2] = np.arange(len(amps))
    idx = basis.lookup(occ)
    inside = idx >= 0
    vec = np.zeros(basis.dim, dtype=np.complex128)
    vec[idx[inside]] = amps[inside]
    deficit = tail + float(np.sum(np.abs(amps[~inside]) ** 2))
    return _finish(basis, vec, deficit, threshold=threshold)


def product(states: Sequence[StateVector], basis: FockBasis | None = None,
            threshold: float = DEFAULT_DEFICIT_BAR) -> StateVector:
    """Tensor product of states on disjoint mode groups.

    Without ``basis`` the joint basis is the plain product of the component
    bases' modes and cutoffs.  With a ``basis`` (which may carry a charge cutoff
    or constraints) product amplitudes outside it are dropped and their mass is
    added to the deficit.
    """
    states = list(states)
    if not states:
        raise ConfigurationError("product of no states")
    seen: list[str] = []
    for s in states:
        for lab in s.basis.labels:
            if lab in seen:
                raise ConfigurationError(f"mode {lab!r} appears in more than one factor")
            seen.append(lab)
    if basis is None:
        modes = ModeSet(
            tuple(seen),
            tuple(w for s in states for w in s.basis.modes.charge_weights),
        )
        cutoffs = tuple(c for s in states for c in s.basis.cutoffs)
        basis = build_basis(modes, TruncationSpec(cutoffs))
    if sorted(seen) != sorted(basis.labels):
        raise ConfigurationError(f"factor modes {seen} do not partition basis modes {basis.labels}")
    amp = np.ones(basis.dim, dtype=np.complex128)
    for s in states:
        cols = [basis.mode_index(lab) for lab in s.basis.labels]
        idx = s.basis.lookup(basis.occupations[:, cols])
        amp *= np.where(idx >= 0, s.amplitudes[np.maximum(idx, 0)], 0.0)
    kept = float(np.sum(np.abs(amp) ** 2))
    log_kept = math.log(kept) if kept > 0 else -math.inf
    for s in states:
        log_kept += math.log1p(-min(s.norm_deficit, 1.0 - 1e-300))
    deficit = -math.expm1(log_kept)
    flags = {f for s in states for f in s.flags}
    return _finish(basis, amp, deficit, flags, threshold)


def _first_adequate(p: np.ndarray, start: int, deficit_bar: float, moment_bar: float, order: int) -> int | None:
    """Smallest ``n >= start`` whose tail passes both bars.

    Only the lower half of ``p`` is searched so the tail sums are not cut short
    by the end of the array; None asks the caller for a longer ``p``.
    """
    k = np.arange(len(p), dtype=np.float64)
    w = np.ones_like(k)
    for j in range(order):
        w *= k - j
    wp = np.clip(w, 0, None) * p
    mass_tail = np.cumsum(p[::-1])[::-1]  # mass at occupation >= index
    mom_tail = np.cumsum(wp[::-1])[::-1]
    total = mom_tail[0]
    for n in range(start, len(p) // 2):
        if mass_tail[n + 1] < deficit_bar and (total == 0 or mom_tail[n + 1] < moment_bar * total):
            return n
    return None


def default_cutoff(alpha_mag: float = 0.0, r: float = 0.0, deficit_bar: float = DEFAULT_DEFICIT_BAR,
                   minimum: int = 12, moment_bar: float = DEFAULT_MOMENT_BAR, moment_order: int = 4) -> int:
    """Condensate cutoff for a (squeezed) coherent input.

    At least ``max(4|alpha|^2, 10 sinh^2 r, minimum)``, raised until the ideal
    state's mass above the cutoff is below ``deficit_bar`` and the share of its
    ``moment_order``-th factorial moment carried above the cutoff is below
    ``moment_bar``.  The second bar matters for molecular statistics, which
    probe fourth-order moments of the condensate.
    """
    start = max(math.ceil(4 * alpha_mag**2), math.ceil(10 * math.sinh(r) ** 2), minimum)
    length = 2 * start + 40
    while True:
        if r == 0:
            p = poisson.pmf(np.arange(length), alpha_mag**2)
        else:
            p = np.abs(_single_mode_squeezed(0.5 * r, alpha_mag, length)[:length]) ** 2
        n = _first_adequate(p, start, deficit_bar, moment_bar, moment_order)
        if n is not None:
            return n
        length *= 2


def default_pair_cutoff(kappa: float, deficit_bar: float = DEFAULT_DEFICIT_BAR, minimum: int = 12) -> int:
    """Per-mode cutoff for a two-mode squeezed vacuum: ``tanh(kappa)**(2(n+1)) < bar``."""
    t2 = math.tanh(kappa) ** 2
    n = minimum
    if t2 == 0:
        return n
    while t2 ** (n + 1) >= deficit_bar:
        n += 1
    return n


def prepare(basis: FockBasis, specs: Sequence, threshold: float = DEFAULT_DEFICIT_BAR) -> StateVector:
    """Product state from per-mode specs; unlisted modes start in vacuum.

    Each spec is a :class:`CoherentSpec`, :class:`SqueezeSpec`,
    :class:`TwoModeSqueezeSpec` or a ``(mode, n)`` Fock pair.
    """
    factors = []
    used: list[str] = []
    cut = dict(zip(basis.labels, basis.cutoffs))

    def sub_basis(labels):
        return build_basis(basis.modes.subset(labels), TruncationSpec(tuple(cut[lab] for lab in labels)))

    for spec in specs:
        if isinstance(spec, TwoModeSqueezeSpec):
            b = sub_basis(spec.modes)
            factors.append(two_mode_squeezed_vacuum(b, spec, threshold))
            used += list(spec.modes)
        elif isinstance(spec, SqueezeSpec):
            factors.append(squeezed(sub_basis([spec.mode]), spec, threshold))
            used.append(spec.mode)
        elif isinstance(spec, CoherentSpec):
            factors.append(coherent(sub_basis([spec.mode]), spec, threshold))
            used.append(spec.mode)
        else:
            mode, n = spec
            factors.append(fock(sub_basis([mode]), (int(n),)))
            used.append(mode)
    for lab in basis.labels:
        if lab not in used:
            factors.append(vacuum(sub_basis([lab])))
    return product(factors, basis, threshold)
