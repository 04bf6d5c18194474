"""Unitary time evolution ``psi(t) = exp(-iHt) psi(0)``.

Two methods:

``dense-eigen``
    The Hamiltonian is split into the connected components of its sparsity
    graph (charge sectors, for the models here) and each block is diagonalized
    once.  Any time is then a phase multiplication, so a whole grid costs one
    decomposition.
``krylov``
    Short-iteration Lanczos with full reorthogonalization.  The spectrum is
    centred with Gershgorin bounds and the interval is cut into substeps with
    ``half_width * dt <= step_norm_bound``.

``auto`` needs the largest block to fit ``dense_dim_limit`` for dense-eigen;
given a time horizon it then picks whichever method has the smaller rough
flop estimate (one decomposition versus Lanczos substeps over the horizon).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import BasisMismatchError, ConfigurationError, NonHermitianError, NormDriftError
from .fock import SparseOperator, check_hermitian
from .states import LEAKAGE_FLAG, StateVector

METHODS = ("auto", "dense-eigen", "krylov")


@dataclass(frozen=True)
class EvolveConfig:
    method: str = "auto"
    dense_dim_limit: int = 2000
    krylov_subspace_dim: int = 30
    step_norm_bound: float = 1.0
    leakage_threshold: float = 1e-8
    norm_tolerance: float = 1e-10
    hermitian_tol: float = 1e-12

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.dense_dim_limit < 1 or self.krylov_subspace_dim < 2:
            raise ConfigurationError("dimensions must be positive")
        for name in ("step_norm_bound", "leakage_threshold", "norm_tolerance", "hermitian_tol"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times starting at 0 (units of 1/coupling)."""

    times: tuple[float, ...]

    def __post_init__(self):
        t = tuple(float(x) for x in self.times)
        if not t or t[0] != 0.0:
            raise ConfigurationError("a time grid must start at t = 0")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ConfigurationError("grid times must be strictly increasing")
        object.__setattr__(self, "times", t)

    @classmethod
    def linear(cls, t_max: float, n_steps: int) -> "TimeGrid":
        if not t_max > 0 or n_steps < 1:
            raise ConfigurationError("need t_max > 0 and n_steps >= 1")
        return cls(tuple(np.linspace(0.0, t_max, n_steps + 1)))

    @classmethod
    def logarithmic(cls, t_min: float, t_max: float, n_steps: int) -> "TimeGrid":
        """``0`` followed by ``n_steps`` log-spaced points from ``t_min`` to ``t_max``."""
        if not 0 < t_min < t_max or n_steps < 1:
            raise ConfigurationError("need 0 < t_min < t_max and n_steps >= 1")
        return cls((0.0,) + tuple(np.geomspace(t_min, t_max, n_steps)))

    def __len__(self):
        return len(self.times)

    def as_array(self) -> np.ndarray:
        return np.array(self.times)


def _magnitudes(m) -> sp.csr_matrix:
    return sp.csr_matrix((np.abs(m.data), m.indices, m.indptr), shape=m.shape)


class _DenseBlocks:
    def __init__(self, h: SparseOperator):
        m = h.matrix
        n = m.shape[0]
        _, labels = connected_components(_magnitudes(m), directed=False)
        order = np.argsort(labels, kind="stable")
        cuts = np.flatnonzero(np.diff(labels[order])) + 1
        self.blocks = []
        singles = []
        for idx in np.split(order, cuts):
            if len(idx) == 1:
                singles.append(idx[0])
                continue
            sub = m[idx][:, idx].toarray()
            w, v = la.eigh(sub)
            self.blocks.append((idx, w, v))
        self.singles = np.array(singles, dtype=np.int64)
        self.single_energy = m.diagonal()[self.singles].real if len(singles) else np.zeros(0)
        self.dim = n

    def coefficients(self, psi: np.ndarray):
        return [v.conj().T @ psi[idx] for idx, _, v in self.blocks]

    def apply(self, psi: np.ndarray, coeffs, t: float) -> np.ndarray:
        if t == 0:
            return psi.copy()
        out = np.zeros(self.dim, dtype=np.complex128)
        for (idx, w, v), c in zip(self.blocks, coeffs):
            out[idx] = v @ (np.exp(-1j * w * t) * c)
        if len(self.singles):
            out[self.singles] = np.exp(-1j * self.single_energy * t) * psi[self.singles]
        return out


def block_sizes(h: SparseOperator) -> np.ndarray:
    _, labels = connected_components(_magnitudes(h.matrix), directed=False)
    return np.bincount(labels)


def largest_block(h: SparseOperator) -> int:
    return int(block_sizes(h).max())


def _dense_cost(sizes: np.ndarray, n_times: int) -> float:
    b = sizes[sizes > 1].astype(np.float64)
    return float(np.sum(10 * b**3) + n_times * np.sum(4 * b**2))


def _krylov_cost(h: SparseOperator, half: float, cfg: EvolveConfig, t_span: float, n_times: int) -> float:
    nsub = math.ceil(half * t_span / cfg.step_norm_bound) + n_times
    k = cfg.krylov_subspace_dim
    return float(nsub * k * (8 * h.matrix.nnz + 16 * k * h.matrix.shape[0]))


def _gershgorin(m):
    diag = m.diagonal().real
    radius = np.asarray(_magnitudes(m).sum(axis=1)).ravel() - np.abs(diag)
    lo = float(np.min(diag - radius))
    hi = float(np.max(diag + radius))
    return 0.5 * (lo + hi), 0.5 * (hi - lo)


def _lanczos_step(m, shift: float, v: np.ndarray, dt: float, kdim: int) -> np.ndarray:
    """``exp(-i (H - shift) dt) v`` from a ``kdim``-dimensional Krylov space."""
    beta0 = np.linalg.norm(v)
    if beta0 == 0:
        return v.copy()
    n = v.shape[0]
    kdim = min(kdim, n)
    V = np.empty((kdim, n), dtype=np.complex128)
    alpha = np.zeros(kdim)
    beta = np.zeros(kdim)
    V[0] = v / beta0
    k = kdim
    for j in range(kdim):
        w = m @ V[j] - shift * V[j]
        alpha[j] = np.vdot(V[j], w).real
        # full reorthogonalization, twice for stability
        for _ in range(2):
            w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
        if j + 1 == kdim:
            break
        b = np.linalg.norm(w)
        if b < 1e-13 * (abs(alpha[j]) + 1.0):
            k = j + 1
            break
        beta[j] = b
        V[j + 1] = w / b
    theta, q = la.eigh_tridiagonal(alpha[:k], beta[: k - 1])
    y = q @ (np.exp(-1j * theta * dt) * q[0].conj())
    return beta0 * (V[:k].T @ y)


class Propagator:
    """Evolution under one Hamiltonian, caching its decomposition."""

    def __init__(self, h: SparseOperator, cfg: EvolveConfig | None = None,
                 horizon: tuple[float, int] | None = None):
        """``horizon = (t_span, n_times)`` lets ``auto`` weigh the two methods."""
        cfg = cfg or EvolveConfig()
        if not h.hermitian_hint and not check_hermitian(h, cfg.hermitian_tol):
            raise NonHermitianError("Hamiltonian is not Hermitian")
        self.h = h
        self.cfg = cfg
        self._center, self._half = _gershgorin(h.matrix)
        method = cfg.method
        if method == "auto":
            sizes = block_sizes(h)
            method = "dense-eigen" if sizes.max() <= cfg.dense_dim_limit else "krylov"
            if method == "dense-eigen" and horizon is not None:
                t_span, n_times = abs(float(horizon[0])), int(horizon[1])
                if _krylov_cost(h, self._half, cfg, t_span, n_times) < _dense_cost(sizes, n_times):
                    method = "krylov"
        self.method = method
        self._dense = _DenseBlocks(h) if method == "dense-eigen" else None

    def _check(self, psi: StateVector):
        if not psi.basis.compatible(self.h.basis):
            raise BasisMismatchError("state and Hamiltonian live on different bases")

    def _krylov(self, vec: np.ndarray, t: float) -> np.ndarray:
        if t == 0:
            return vec.copy()
        nsub = max(1, math.ceil(self._half * abs(t) / self.cfg.step_norm_bound))
        dt = t / nsub
        out = vec
        for _ in range(nsub):
            out = _lanczos_step(self.h.matrix, self._center, out, dt, self.cfg.krylov_subspace_dim)
        return out * np.exp(-1j * self._center * t)

    def _wrap(self, psi0: StateVector, vec: np.ndarray, t: float) -> StateVector:
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > self.cfg.norm_tolerance + abs(psi0.norm - 1.0):
            raise NormDriftError(f"norm drifted to {norm!r} at t={t}")
        leak = float(np.sum(np.abs(vec[psi0.basis.boundary_mask]) ** 2))
        flags = set(psi0.flags)
        if leak > self.cfg.leakage_threshold:
            flags.add(LEAKAGE_FLAG)
        return StateVector(psi0.basis, vec, psi0.norm_deficit, leakage=leak, flags=flags)

    def evolve(self, psi0: StateVector, t: float) -> StateVector:
        self._check(psi0)
        vec = psi0.amplitudes
        if self._dense is not None:
            out = self._dense.apply(vec, self._dense.coefficients(vec), t)
        else:
            out = self._krylov(vec, t)
        return self._wrap(psi0, out, t)

    def series(self, psi0: StateVector, grid: TimeGrid) -> list[StateVector]:
        self._check(psi0)
        vec = psi0.amplitudes
        out = []
        if self._dense is not None:
            coeffs = self._dense.coefficients(vec)
            for t in grid.times:
                out.append(self._wrap(psi0, self._dense.apply(vec, coeffs, t), t))
            return out
        cur, t_prev = vec, 0.0
        for t in grid.times:
            cur = self._krylov(cur, t - t_prev)
            t_prev = t
            out.append(self._wrap(psi0, cur, t))
        return out


def evolve(h: SparseOperator, psi0: StateVector, t: float, cfg: EvolveConfig | None = None) -> StateVector:
    return Propagator(h, cfg, horizon=(t, 1)).evolve(psi0, t)


def evolve_series(h: SparseOperator, psi0: StateVector, grid: TimeGrid | Sequence[float],
                  cfg: EvolveConfig | None = None) -> list[StateVector]:
    if not isinstance(grid, TimeGrid):
        grid = TimeGrid(tuple(grid))
    return Propagator(h, cfg, horizon=(grid.times[-1], len(grid))).series(psi0, grid)
