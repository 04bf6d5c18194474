import math

import numpy as np
import pytest
import scipy.linalg as la

from amlaser.errors import ConfigurationError, UndefinedStatisticError
from amlaser.fock import ModeSet, TruncationSpec, build_basis
from amlaser.models import ThreeModeParams, build_h3, three_mode_basis
from amlaser.observables import (
    csi_check,
    g2_auto,
    g2_cross,
    mandel_q,
    parse_metric,
    population,
    series_report,
    squeezing,
)
from amlaser.propagator import TimeGrid, evolve_series
from amlaser.states import CoherentSpec, SqueezeSpec, TwoModeSqueezeSpec, fock, prepare, vacuum

PAIR = ModeSet(("a", "b"))


def single(cutoff):
    return build_basis(ModeSet(("c",)), TruncationSpec(cutoff))


@pytest.fixture(scope="module")
def tmsv():
    b = build_basis(PAIR, TruncationSpec(40))
    return prepare(b, [TwoModeSqueezeSpec(("a", "b"), 1.0)])


def test_populations():
    assert population(vacuum(single(4)), "c") == 0
    assert population(prepare(single(30), [CoherentSpec("c", 2.0)]), "c") == pytest.approx(4, abs=1e-8)
    sq = prepare(single(40), [SqueezeSpec("c", 0.5)])
    assert population(sq, "c") == pytest.approx(math.sinh(0.5) ** 2, abs=1e-8)


def test_squeezing_reference_states():
    v = squeezing(vacuum(single(6)), "c")
    assert (v.S1, v.S2) == pytest.approx((0.0, 0.0), abs=1e-14)
    for alpha, phase in [(1.0, 0.0), (2.0, 1.1), (0.5, -2.0)]:
        rep = squeezing(prepare(single(40), [CoherentSpec("c", alpha, phase)]), "c")
        assert (rep.S1, rep.S2) == pytest.approx((0.0, 0.0), abs=1e-8)


def test_squeezed_vacuum_convention_golden():
    # pinned convention: at phi_s = 0 the second quadrature is the squeezed one
    r = 0.5
    rep = squeezing(prepare(single(60), [SqueezeSpec("c", r, 0.0)]), "c")
    assert rep.S2 == pytest.approx(math.exp(-2 * r) - 1, abs=1e-8)
    assert rep.S1 == pytest.approx(math.exp(2 * r) - 1, abs=1e-8)
    assert rep.S2 == pytest.approx(-0.6321205588, abs=1e-8)


def test_squeezing_against_dense_generator_oracle():
    # independent construction: expm of the generator on a large dense space
    r, phi = 0.7, 0.9
    n = 120
    a = np.diag(np.sqrt(np.arange(1, n)), 1)
    xi = 0.5 * r * np.exp(-1j * phi)
    gen = xi * a.conj().T @ a.conj().T - np.conj(xi) * a @ a
    vac = np.zeros(n, dtype=complex)
    vac[0] = 1
    psi = la.expm(gen) @ vac
    g1 = 0.5 * (a + a.conj().T)
    g2 = -0.5j * (a - a.conj().T)
    var = [np.vdot(psi, g @ g @ psi).real - np.vdot(psi, g @ psi).real ** 2 for g in (g1, g2)]
    rep = squeezing(prepare(single(80), [SqueezeSpec("c", r, phi)]), "c")
    assert (rep.S1, rep.S2) == pytest.approx((4 * var[0] - 1, 4 * var[1] - 1), abs=1e-8)


def test_mandel_q():
    assert mandel_q(prepare(single(40), [CoherentSpec("c", 2.0)]), "c") == pytest.approx(0, abs=1e-7)
    assert mandel_q(fock(single(3), (2,)), "c") == pytest.approx(-1)
    r = 0.5
    sq = prepare(single(60), [SqueezeSpec("c", r)])
    # variance 2 sinh^2 cosh^2 over mean sinh^2, minus one
    assert mandel_q(sq, "c") == pytest.approx(2 * math.cosh(r) ** 2 - 1, abs=1e-7)


def test_g2_values(tmsv):
    b = build_basis(PAIR, TruncationSpec(30))
    coh = prepare(b, [CoherentSpec("a", 1.2), CoherentSpec("b", 0.8, 0.5)])
    assert g2_cross(coh, "a", "b") == pytest.approx(1, abs=1e-9)
    assert g2_auto(coh, "a") == pytest.approx(1, abs=1e-7)
    assert g2_cross(tmsv, "a", "b") == pytest.approx(2 + 1 / math.sinh(1) ** 2, abs=1e-4)
    assert g2_auto(tmsv, "a") == pytest.approx(2, abs=1e-4)
    one_one = fock(b, (1, 1))
    assert g2_cross(one_one, "a", "b") == 1
    assert g2_auto(fock(single(3), (2,)), "c") == 0.5


def test_csi(tmsv):
    b = build_basis(PAIR, TruncationSpec(30))
    coh = csi_check(prepare(b, [CoherentSpec("a", 1.0), CoherentSpec("b", 1.0)]), "a", "b")
    assert (coh.csi_lhs, coh.csi_rhs) == pytest.approx((1, 1), abs=1e-6)
    rep = csi_check(tmsv, "a", "b")
    assert rep.csi_lhs == pytest.approx((2 + 1 / math.sinh(1) ** 2) ** 2, abs=1e-3)
    assert rep.csi_rhs == pytest.approx(4, abs=1e-3)
    assert rep.csi_violated
    f = csi_check(fock(b, (1, 1)), "a", "b")
    assert (f.csi_lhs, f.csi_rhs, f.csi_violated) == (1, 0, True)


def test_undefined_statistics_raise():
    v = vacuum(build_basis(PAIR, TruncationSpec(3)))
    for fn, args in [(mandel_q, ("a",)), (g2_auto, ("a",)), (g2_cross, ("a", "b"))]:
        with pytest.raises(UndefinedStatisticError):
            fn(v, *args)
    with pytest.raises(ConfigurationError):
        g2_cross(v, "a", "a")


def test_series_report_tables():
    b = three_mode_basis(16)
    h = build_h3(b, ThreeModeParams(1, 1))
    psi = prepare(b, [CoherentSpec("c", 2.0)], threshold=1.0)
    grid = TimeGrid.linear(0.1, 10)
    states = evolve_series(h, psi, grid)
    empty = series_report(states, grid, [])
    assert empty.header() == ["time"] and len(empty.rows()) == 11
    rep = series_report(states, grid, ["population:c", "population:b", "population:g", "charge", "g2_cross:b,g"])
    nc, nb, ng = (rep.column(k) for k in ("n_c", "n_b", "n_g"))
    assert np.max(np.abs(nc + nb + 2 * ng - (nc[0] + nb[0] + 2 * ng[0]))) < 1e-9
    assert nc[0] == pytest.approx(population(psi, "c"))
    assert math.isnan(rep.column("g2_b_g")[0])
    csv_text = rep.to_csv()
    lines = csv_text.splitlines()
    assert lines[0] == "time,n_c,n_b,n_g,charge,g2_b_g"
    assert lines[1].endswith(",nan")
    assert lines[2].split(",")[0] == "0.01"


def test_parse_metric():
    assert parse_metric("g2_cross:b,g") == ("g2_cross", ("b", "g"))
    assert parse_metric("charge") == ("charge", ())
    with pytest.raises(ConfigurationError):
        parse_metric("bogus:b")
    with pytest.raises(ConfigurationError):
        parse_metric("population")
