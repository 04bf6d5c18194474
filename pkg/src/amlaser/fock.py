"""Truncated multi-mode Fock bases and sparse bosonic operators.

A :class:`FockBasis` is the set of occupation tuples admitted by a
:class:`TruncationSpec`, stored in lexicographic order.  Operators are
:class:`SparseOperator` objects wrapping a canonical CSR matrix over one basis.
Normal-ordered ladder monomials are built directly from their matrix elements
(:func:`monomial`), so no intermediate state has to live inside the basis.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from numbers import Number
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import BasisMismatchError, ConfigurationError, UnknownModeError

__all__ = [
    "ModeSet",
    "TruncationSpec",
    "FockBasis",
    "SparseOperator",
    "build_basis",
    "annihilation",
    "creation",
    "number",
    "monomial",
    "identity",
    "compose",
    "commutator",
    "check_hermitian",
]


@dataclass(frozen=True)
class ModeSet:
    """Ordered mode labels with their weights in the conserved charge (default 1)."""

    labels: tuple[str, ...]
    charge_weights: tuple[int, ...] | None = None

    def __post_init__(self):
        labels = tuple(str(lab) for lab in self.labels)
        raw = (1,) * len(labels) if self.charge_weights is None else self.charge_weights
        weights = tuple(int(w) for w in raw)
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"duplicate mode labels in {labels}")
        if len(weights) != len(labels):
            raise ConfigurationError("charge_weights must match labels in length")
        if any(w <= 0 for w in weights):
            raise ConfigurationError("charge weights must be positive integers")
        if not labels:
            raise ConfigurationError("a ModeSet needs at least one mode")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "charge_weights", weights)

    def __len__(self):
        return len(self.labels)

    def __contains__(self, label):
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownModeError(f"unknown mode {label!r}; modes are {self.labels}") from None

    def subset(self, labels: Sequence[str]) -> "ModeSet":
        return ModeSet(tuple(labels), tuple(self.charge_weights[self.index(lab)] for lab in labels))


@dataclass(frozen=True)
class TruncationSpec:
    """Cutoffs defining the finite basis.

    ``per_mode_cutoff`` is either one int for all modes, a sequence in mode
    order, or a mapping label -> cutoff.  ``constraints`` holds extra linear
    inequalities ``sum_i w_i n_i <= bound`` (weights may be negative, so an
    equality is two opposite inequalities); they are used to restrict a basis
    to a sector of several conserved quantities.
    """

    per_mode_cutoff: int | tuple[int, ...] | Mapping[str, int]
    total_charge_cutoff: int | None = None
    constraints: tuple[tuple[tuple[int, ...], int], ...] = ()

    def __post_init__(self):
        cut = self.per_mode_cutoff
        if isinstance(cut, _FrozenCutoffs):
            cut = dict(cut)
        if isinstance(cut, Mapping):
            cut = tuple(sorted((str(k), int(v)) for k, v in cut.items()))
            object.__setattr__(self, "per_mode_cutoff", _FrozenCutoffs(cut))
            values = [v for _, v in cut]
        elif isinstance(cut, (int, np.integer)):
            object.__setattr__(self, "per_mode_cutoff", int(cut))
            values = [int(cut)]
        else:
            values = [int(v) for v in cut]
            object.__setattr__(self, "per_mode_cutoff", tuple(values))
        if any(v < 0 for v in values):
            raise ConfigurationError("per-mode cutoffs must be >= 0")
        if self.total_charge_cutoff is not None:
            if int(self.total_charge_cutoff) < 0:
                raise ConfigurationError("total_charge_cutoff must admit the vacuum (>= 0)")
            object.__setattr__(self, "total_charge_cutoff", int(self.total_charge_cutoff))
        cons = tuple((tuple(int(w) for w in ws), int(b)) for ws, b in self.constraints)
        if any(b < 0 for _, b in cons):
            raise ConfigurationError("constraint bounds must admit the vacuum (>= 0)")
        object.__setattr__(self, "constraints", cons)

    def cutoffs_for(self, modes: ModeSet) -> tuple[int, ...]:
        cut = self.per_mode_cutoff
        if isinstance(cut, int):
            return (cut,) * len(modes)
        if isinstance(cut, _FrozenCutoffs):
            table = dict(cut)
            unknown = set(table) - set(modes.labels)
            if unknown:
                raise UnknownModeError(f"cutoffs given for unknown modes {sorted(unknown)}")
            missing = [lab for lab in modes.labels if lab not in table]
            if missing:
                raise ConfigurationError(f"no cutoff for modes {missing}")
            return tuple(table[lab] for lab in modes.labels)
        if len(cut) != len(modes):
            raise ConfigurationError(f"{len(cut)} cutoffs for {len(modes)} modes")
        return tuple(cut)

    def scaled(self, factor: int) -> "TruncationSpec":
        """Every cutoff and bound multiplied by ``factor`` (convergence studies)."""
        cut = self.per_mode_cutoff
        if isinstance(cut, int):
            new = cut * factor
        elif isinstance(cut, _FrozenCutoffs):
            new = {k: v * factor for k, v in cut}
        else:
            new = tuple(v * factor for v in cut)
        total = None if self.total_charge_cutoff is None else self.total_charge_cutoff * factor
        cons = tuple((w, b * factor) for w, b in self.constraints)
        return TruncationSpec(new, total, cons)


class _FrozenCutoffs(tuple):
    """Hashable stand-in for a label -> cutoff mapping."""


class FockBasis:
    """Occupation tuples admitted by a truncation, in lexicographic order.

    Built through :func:`build_basis`.  ``occupations`` is a read-only
    ``(dim, n_modes)`` integer array; ``states`` and ``index_map`` give the
    same content as tuples.
    """

    def __init__(self, modes: ModeSet, truncation: TruncationSpec, cutoffs, occupations):
        self.modes = modes
        self.truncation = truncation
        self.cutoffs = tuple(int(c) for c in cutoffs)
        occ = np.ascontiguousarray(occupations, dtype=np.int64)
        occ.setflags(write=False)
        self.occupations = occ
        radix = np.array([c + 1 for c in self.cutoffs], dtype=np.int64)
        if float(np.prod(radix.astype(float))) > 2.0**62:
            raise ConfigurationError("basis too large for integer state keys")
        strides = np.ones(len(radix), dtype=np.int64)
        for i in range(len(radix) - 2, -1, -1):
            strides[i] = strides[i + 1] * radix[i + 1]
        self._strides = strides
        self._keys = occ @ strides
        self._op_cache: dict = {}

    @property
    def dim(self) -> int:
        return self.occupations.shape[0]

    @property
    def labels(self) -> tuple[str, ...]:
        return self.modes.labels

    def __len__(self):
        return self.dim

    def __repr__(self):
        return f"FockBasis(modes={self.labels}, cutoffs={self.cutoffs}, dim={self.dim})"

    def mode_index(self, label: str) -> int:
        return self.modes.index(label)

    def occupation(self, label: str) -> np.ndarray:
        return self.occupations[:, self.mode_index(label)]

    @cached_property
    def states(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in row) for row in self.occupations]

    @cached_property
    def index_map(self) -> dict[tuple[int, ...], int]:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def charges(self) -> np.ndarray:
        c = self.occupations @ np.array(self.modes.charge_weights, dtype=np.int64)
        c.setflags(write=False)
        return c

    @cached_property
    def max_occupation(self) -> np.ndarray:
        """Largest occupation of each mode actually present in the basis."""
        return self.occupations.max(axis=0)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        """States within one quantum of some per-mode cutoff."""
        cut = np.array(self.cutoffs, dtype=np.int64)
        return np.any(self.occupations >= cut - 1, axis=1)

    def index_of(self, occupation) -> int:
        occ = self._as_tuple(occupation)
        idx = int(self.lookup(np.array([occ]))[0])
        if idx < 0:
            raise ConfigurationError(f"occupation {occ} is not in the basis")
        return idx

    def lookup(self, occupations: np.ndarray) -> np.ndarray:
        """Vectorized index lookup; ``-1`` where the occupation is not admitted."""
        occ = np.asarray(occupations, dtype=np.int64).reshape(-1, len(self.modes))
        cut = np.array(self.cutoffs, dtype=np.int64)
        in_range = np.all((occ >= 0) & (occ <= cut), axis=1)
        keys = occ @ self._strides
        pos = np.searchsorted(self._keys, keys)
        pos_c = np.minimum(pos, self.dim - 1)
        found = in_range & (pos < self.dim) & (self._keys[pos_c] == keys)
        return np.where(found, pos_c, -1)

    def _as_tuple(self, occupation) -> tuple[int, ...]:
        if isinstance(occupation, Mapping):
            occ = [0] * len(self.modes)
            for lab, n in occupation.items():
                occ[self.mode_index(lab)] = int(n)
            return tuple(occ)
        occ = tuple(int(v) for v in occupation)
        if len(occ) != len(self.modes):
            raise ConfigurationError(f"occupation {occ} has wrong length for modes {self.labels}")
        return occ

    def compatible(self, other: "FockBasis") -> bool:
        return self is other or (
            self.modes == other.modes
            and self.cutoffs == other.cutoffs
            and self.truncation == other.truncation
        )

    def cached(self, key, factory):
        """Memoize a derived object (typically an operator) on this basis."""
        if key not in self._op_cache:
            self._op_cache[key] = factory()
        return self._op_cache[key]

    def to_json(self) -> dict:
        return {
            "modes": list(self.labels),
            "charge_weights": list(self.modes.charge_weights),
            "cutoffs": list(self.cutoffs),
            "total_charge_cutoff": self.truncation.total_charge_cutoff,
            "dimension": self.dim,
            "states": [list(s) for s in self.states],
        }


def build_basis(modes: ModeSet, trunc: TruncationSpec) -> FockBasis:
    """Enumerate every occupation admitted by ``trunc`` in lexicographic order."""
    cutoffs = trunc.cutoffs_for(modes)
    n = len(modes)
    rows, bounds = [], []
    if trunc.total_charge_cutoff is not None:
        rows.append(modes.charge_weights)
        bounds.append(trunc.total_charge_cutoff)
    for weights, bound in trunc.constraints:
        if len(weights) != n:
            raise ConfigurationError(f"constraint weights {weights} do not match {n} modes")
        rows.append(weights)
        bounds.append(bound)
    W = np.array(rows, dtype=np.int64).reshape(len(rows), n)
    B = np.array(bounds, dtype=np.int64)
    cut = np.array(cutoffs, dtype=np.int64)
    # smallest contribution modes j.. can still add to each constraint
    contrib_min = np.minimum(0, W * cut[None, :])
    rest_min = np.zeros((n + 1, len(rows)), dtype=np.int64)
    for j in range(n - 1, -1, -1):
        rest_min[j] = rest_min[j + 1] + contrib_min[:, j]

    partial = np.zeros((1, 0), dtype=np.int64)
    sums = np.zeros((1, len(rows)), dtype=np.int64)
    for j in range(n):
        vals = np.arange(cut[j] + 1, dtype=np.int64)
        k = len(vals)
        partial = np.hstack([np.repeat(partial, k, axis=0), np.tile(vals, partial.shape[0])[:, None]])
        sums = np.repeat(sums, k, axis=0) + np.tile(vals, sums.shape[0])[:, None] * W[:, j][None, :]
        keep = np.all(sums + rest_min[j + 1][None, :] <= B[None, :], axis=1)
        partial, sums = partial[keep], sums[keep]
    if partial.shape[0] == 0:
        raise ConfigurationError("truncation admits no occupation at all")
    return FockBasis(modes, trunc, cutoffs, partial)


class SparseOperator:
    """Complex sparse matrix over a :class:`FockBasis`.

    The matrix is kept in canonical CSR form (sorted indices, no duplicates,
    no stored zeros).  Entries with modulus ``<= drop_tol`` are removed when
    ``drop_tol > 0``.
    """

    __slots__ = ("basis", "matrix", "hermitian_hint")

    def __init__(self, basis: FockBasis, matrix, hermitian_hint: bool = False, drop_tol: float = 0.0):
        m = sp.csr_matrix(matrix, dtype=np.complex128, copy=True)
        if m.shape != (basis.dim, basis.dim):
            raise BasisMismatchError(f"matrix shape {m.shape} does not match basis dimension {basis.dim}")
        m.sum_duplicates()
        if drop_tol > 0:
            m.data[np.abs(m.data) <= drop_tol] = 0.0
        m.eliminate_zeros()
        m.sort_indices()
        self.basis = basis
        self.matrix = m
        self.hermitian_hint = bool(hermitian_hint)

    def __repr__(self):
        return f"SparseOperator(dim={self.basis.dim}, nnz={self.nnz}, hermitian_hint={self.hermitian_hint})"

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    @property
    def shape(self):
        return self.matrix.shape

    def entries(self):
        """``(rows, cols, values)`` in row-major order."""
        coo = self.matrix.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.copy()

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def dag(self) -> "SparseOperator":
        return SparseOperator(self.basis, self.matrix.conj().T, self.hermitian_hint)

    def _check(self, other: "SparseOperator"):
        if not self.basis.compatible(other.basis):
            raise BasisMismatchError("operators live on different bases")

    def __add__(self, other):
        if not isinstance(other, SparseOperator):
            return NotImplemented
        self._check(other)
        return SparseOperator(self.basis, self.matrix + other.matrix)

    def __sub__(self, other):
        if not isinstance(other, SparseOperator):
            return NotImplemented
        self._check(other)
        return SparseOperator(self.basis, self.matrix - other.matrix)

    def __neg__(self):
        return SparseOperator(self.basis, -self.matrix, self.hermitian_hint)

    def __mul__(self, scalar):
        if not isinstance(scalar, Number):
            return NotImplemented
        return SparseOperator(self.basis, self.matrix * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            self._check(other)
            return SparseOperator(self.basis, self.matrix @ other.matrix)
        return self.matrix @ np.asarray(other)

    def apply(self, vector: np.ndarray) -> np.ndarray:
        return self.matrix @ vector

    def expect(self, vector: np.ndarray) -> complex:
        return complex(np.vdot(vector, self.matrix @ vector))


def _falling(n: np.ndarray, k: int) -> np.ndarray:
    out = np.ones(n.shape, dtype=np.float64)
    for j in range(k):
        out *= n - j
    return out


def monomial(basis: FockBasis, powers: Mapping[str, tuple[int, int]]) -> SparseOperator:
    """Normal-ordered product ``prod_i (a_i^dag)^p_i a_i^q_i``.

    ``powers`` maps a mode label to ``(p, q)``.  Matrix elements are computed in
    closed form; transitions whose target lies outside the basis are dropped.
    """
    occ = basis.occupations
    delta = np.zeros(len(basis.modes), dtype=np.int64)
    amp = np.ones(basis.dim, dtype=np.float64)
    ok = np.ones(basis.dim, dtype=bool)
    for label, (p, q) in powers.items():
        i = basis.mode_index(label)
        p, q = int(p), int(q)
        if p < 0 or q < 0:
            raise ConfigurationError("ladder powers must be non-negative")
        n = occ[:, i]
        ok &= n >= q
        lowered = n - q
        # a^q |n> = sqrt(n!/(n-q)!) |n-q>,  (a^dag)^p |m> = sqrt((m+p)!/m!) |m+p>
        amp *= np.sqrt(_falling(n.astype(np.float64), q) * _falling((lowered + p).astype(np.float64), p))
        delta[i] = p - q
    src = np.flatnonzero(ok)
    tgt = basis.lookup(occ[src] + delta[None, :])
    keep = tgt >= 0
    src, tgt = src[keep], tgt[keep]
    mat = sp.csr_matrix((amp[src].astype(np.complex128), (tgt, src)), shape=(basis.dim, basis.dim))
    return SparseOperator(basis, mat)


def annihilation(basis: FockBasis, mode: str) -> SparseOperator:
    """Ladder operator with ``<..n-1..|a|..n..> = sqrt(n)``."""
    return basis.cached(("a", mode), lambda: monomial(basis, {mode: (0, 1)}))


def creation(basis: FockBasis, mode: str) -> SparseOperator:
    return basis.cached(("adag", mode), lambda: monomial(basis, {mode: (1, 0)}))


def number(basis: FockBasis, mode: str) -> SparseOperator:
    n = basis.occupation(mode).astype(np.complex128)
    return SparseOperator(basis, sp.diags(n, format="csr"), hermitian_hint=True)


def identity(basis: FockBasis) -> SparseOperator:
    return SparseOperator(basis, sp.identity(basis.dim, dtype=np.complex128, format="csr"), hermitian_hint=True)


def compose(terms: Sequence, coefficients: Sequence[complex] | None = None) -> SparseOperator:
    """Linear combination of operator products.

    Each entry of ``terms`` is a :class:`SparseOperator` or a sequence of them,
    multiplied left to right (so the rightmost factor acts first).  The result is
    ``sum_k coefficients[k] * prod(terms[k])``; coefficients default to 1.  The
    Hermitian hint is set only when :func:`check_hermitian` confirms it.
    """
    terms = list(terms)
    if not terms:
        raise ConfigurationError("compose needs at least one term")
    if coefficients is None:
        coefficients = [1.0] * len(terms)
    if len(coefficients) != len(terms):
        raise ConfigurationError("one coefficient per term is required")
    basis = None
    total = None
    for term, coeff in zip(terms, coefficients):
        factors = [term] if isinstance(term, SparseOperator) else list(term)
        if not factors:
            raise ConfigurationError("empty product in compose")
        for f in factors:
            if basis is None:
                basis = f.basis
            elif not basis.compatible(f.basis):
                raise BasisMismatchError("compose operands live on different bases")
        prod = factors[0].matrix
        for f in factors[1:]:
            prod = prod @ f.matrix
        prod = prod * coeff
        total = prod if total is None else total + prod
    op = SparseOperator(basis, total)
    op.hermitian_hint = check_hermitian(op)
    return op


def commutator(a: SparseOperator, b: SparseOperator) -> SparseOperator:
    return compose([[a, b], [b, a]], [1.0, -1.0])


def check_hermitian(op: SparseOperator, tol: float = 1e-12) -> bool:
    """True iff every entry of ``A - A^dag`` has modulus ``<= tol``."""
    m = op.matrix
    if m.shape[0] != m.shape[1]:
        return False
    diff = (m - m.conj().T).tocsr()
    if diff.nnz == 0:
        return True
    return bool(np.max(np.abs(diff.data)) <= tol)
