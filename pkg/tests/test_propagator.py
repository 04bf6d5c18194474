import math

import numpy as np
import pytest
import scipy.linalg as la
from scipy.sparse.linalg import expm_multiply

from amlaser.errors import BasisMismatchError, ConfigurationError, NonHermitianError
from amlaser.fock import SparseOperator, creation, annihilation
from amlaser.models import ThreeModeParams, build_h3, three_mode_basis
from amlaser.observables import population
from amlaser.propagator import EvolveConfig, Propagator, TimeGrid, evolve, evolve_series
from amlaser.states import LEAKAGE_FLAG, CoherentSpec, fock, prepare

DENSE = EvolveConfig(method="dense-eigen")
KRYLOV = EvolveConfig(method="krylov")


@pytest.fixture(scope="module")
def coherent_run():
    b = three_mode_basis(14)
    h = build_h3(b, ThreeModeParams(1.0, 0.7))
    return h, prepare(b, [CoherentSpec("c", 1.5, 0.3)], threshold=1.0)


def test_zero_time_is_identity(coherent_run):
    h, psi = coherent_run
    for cfg in (DENSE, KRYLOV):
        assert np.array_equal(evolve(h, psi, 0.0, cfg).amplitudes, psi.amplitudes)


@pytest.mark.parametrize("cfg", [DENSE, KRYLOV], ids=["dense", "krylov"])
def test_linear_coupler_rabi(cfg):
    b = three_mode_basis(3)
    h = build_h3(b, ThreeModeParams(1.0, 0.0))
    grid = TimeGrid.linear(math.pi, 64)
    states = evolve_series(h, fock(b, (1, 0, 0)), grid, cfg)
    nb = np.array([population(s, "b") for s in states])
    assert np.max(np.abs(nb - np.sin(grid.as_array()) ** 2)) < 1e-9


def test_charge_two_sector_against_hand_built_oracle():
    l1, l2 = 0.8, 1.3
    b = three_mode_basis(4)
    h = build_h3(b, ThreeModeParams(l1, l2))
    sector = [(2, 0, 0), (1, 1, 0), (0, 2, 0), (0, 0, 1)]
    r2 = math.sqrt(2)
    hs = np.array([
        [0, l1 * r2, 0, l2 * r2],
        [l1 * r2, 0, l1 * r2, 0],
        [0, l1 * r2, 0, 0],
        [l2 * r2, 0, 0, 0],
    ])
    w, v = la.eigh(hs)
    psi0 = fock(b, (2, 0, 0))
    for t in (0.1, 0.7, 2.3):
        ref = v @ (np.exp(-1j * w * t) * v[0].conj())
        for cfg in (DENSE, KRYLOV):
            out = evolve(h, psi0, t, cfg).probabilities
            got = np.array([out[b.index_of(s)] for s in sector])
            assert np.max(np.abs(got - np.abs(ref) ** 2)) < 1e-10


@pytest.mark.parametrize("cfg", [DENSE, KRYLOV], ids=["dense", "krylov"])
def test_matches_expm_multiply(coherent_run, cfg):
    h, psi = coherent_run
    for t in (0.05, 0.6, 1.7):
        ref = expm_multiply(-1j * t * h.matrix, psi.amplitudes)
        assert np.max(np.abs(evolve(h, psi, t, cfg).amplitudes - ref)) < 1e-10


def test_series_consistency_and_semigroup(coherent_run):
    h, psi = coherent_run
    for cfg in (DENSE, KRYLOV):
        series = evolve_series(h, psi, [0.0, 0.4], cfg)
        assert np.allclose(series[0].amplitudes, psi.amplitudes, atol=0)
        single = evolve(h, psi, 0.4, cfg)
        assert np.max(np.abs(series[1].amplitudes - single.amplitudes)) < 1e-10
        two_step = evolve(h, evolve(h, psi, 0.25, cfg), 0.35, cfg)
        assert np.max(np.abs(two_step.amplitudes - evolve(h, psi, 0.6, cfg).amplitudes)) < 1e-9


def test_auto_selection(coherent_run):
    h, _ = coherent_run
    assert Propagator(h).method == "dense-eigen"
    assert Propagator(h, EvolveConfig(dense_dim_limit=3)).method == "krylov"


def test_auto_weighs_horizon():
    b = three_mode_basis(60)
    h = build_h3(b, ThreeModeParams(1.0, 1.0))
    assert Propagator(h, horizon=(0.01, 2)).method == "krylov"
    assert Propagator(h, horizon=(50.0, 2000)).method == "dense-eigen"


def test_errors(coherent_run):
    h, psi = coherent_run
    b = h.basis
    bad = SparseOperator(b, (creation(b, "b") @ annihilation(b, "c")).matrix)
    with pytest.raises(NonHermitianError):
        Propagator(bad)
    other = three_mode_basis(5)
    with pytest.raises(BasisMismatchError):
        evolve(h, fock(other, (1, 0, 0)), 0.1)
    with pytest.raises(ConfigurationError):
        EvolveConfig(method="rk4")


def test_time_grid_validation():
    with pytest.raises(ConfigurationError):
        TimeGrid((0.1, 0.2))
    with pytest.raises(ConfigurationError):
        TimeGrid((0.0, 0.2, 0.2))
    g = TimeGrid.logarithmic(1e-3, 1e-2, 5)
    assert g.times[0] == 0 and len(g) == 6 and g.times[-1] == pytest.approx(1e-2)
    assert TimeGrid.linear(1.0, 4).times == (0.0, 0.25, 0.5, 0.75, 1.0)


def test_leakage_flag():
    b = three_mode_basis(6)
    h = build_h3(b, ThreeModeParams(1.0, 1.0))
    psi = prepare(b, [CoherentSpec("c", 2.0)], threshold=1.0)
    out = evolve(h, psi, 0.5)
    assert out.leakage > 1e-8 and LEAKAGE_FLAG in out.flags
