import math

import numpy as np
import pytest

from amlaser.errors import ConfigurationError
from amlaser.fock import TruncationSpec, build_basis, commutator
from amlaser.models import (
    FIVE_MODES,
    FOUR_MODES,
    THREE_MODES,
    FiveModeParams,
    FourModeParams,
    ThreeModeParams,
    build_h3,
    build_h4,
    build_h5,
    channel_charges,
    charge_operator,
    effective_params,
    five_mode_basis,
    four_mode_basis,
    three_mode_basis,
)


@pytest.fixture(scope="module")
def b5():
    return five_mode_basis(4)


@pytest.fixture(scope="module")
def b3():
    return three_mode_basis(6)


def elem(h, basis, bra, ket):
    return h.to_dense()[basis.index_of(bra), basis.index_of(ket)]


def test_five_mode_zero_couplings_is_diagonal(b5):
    h = build_h5(b5, FiveModeParams(0, 0, 0, 0, 1, 1))
    d = h.to_dense()
    assert np.count_nonzero(d - np.diag(np.diag(d))) == 0
    expect = -b5.occupation("e") - b5.occupation("m")
    assert np.allclose(np.diag(d).real, expect)


def test_five_mode_matrix_elements(b5):
    p = FiveModeParams(0.7, 0.3, 1.1, 1.3, 5.0, 6.0)
    h = build_h5(b5, p)
    assert elem(h, b5, (0, 1, 0, 0, 0), (1, 0, 0, 0, 0)) == pytest.approx(0.7)
    assert elem(h, b5, (0, 0, 0, 1, 0), (2, 0, 0, 0, 0)) == pytest.approx(0.3 * math.sqrt(2))
    assert elem(h, b5, (0, 0, 1, 0, 0), (0, 1, 0, 0, 0)) == pytest.approx(1.1)
    assert elem(h, b5, (0, 0, 0, 0, 1), (0, 0, 0, 1, 0)) == pytest.approx(1.3)
    assert elem(h, b5, (0, 1, 0, 0, 0), (0, 1, 0, 0, 0)) == pytest.approx(-5.0)


def test_three_mode_elements_and_sector_blocks(b3):
    h = build_h3(b3, ThreeModeParams(0.4, 0.9))
    assert elem(h, b3, (0, 0, 1), (2, 0, 0)) == pytest.approx(math.sqrt(2) * 0.9)
    assert elem(h, b3, (1, 1, 0), (2, 0, 0)) == pytest.approx(math.sqrt(2) * 0.4)
    q = b3.charges
    d = np.abs(h.to_dense())
    assert np.all(d[np.ix_(q == 2, q == 3)] == 0)
    assert h.hermitian_hint


def test_four_mode_structure():
    b = four_mode_basis(3, paired=False)
    h = build_h4(b, FourModeParams(0.5, 0.8))
    vac = b.index_of((0, 0, 0, 0))
    assert h.to_dense()[vac, vac] == 0
    # the (a1,b) and (a2,g) channels never mix
    rows, cols, _ = h.entries()
    for i, j in zip(rows, cols):
        si, sj = b.states[i], b.states[j]
        assert si[0] + si[2] == sj[0] + sj[2]
        assert si[1] + si[3] == sj[1] + sj[3]
    for c in channel_charges(b):
        assert np.abs(commutator(h, c).to_dense()).max() == 0


def test_charges_commute_with_hamiltonians(b3, b5):
    for h, b in [(build_h3(b3, ThreeModeParams(1, 1)), b3),
                 (build_h5(b5, FiveModeParams(1, 2, 3, 4, 5, 6)), b5)]:
        assert np.abs(commutator(h, charge_operator(b)).to_dense()).max() == 0


def test_charge_values(b3):
    b5 = five_mode_basis(8)
    c5 = charge_operator(b5).to_dense()
    i = b5.index_of((1, 1, 1, 1, 1))
    assert c5[i, i] == 7
    i = b3.index_of((2, 0, 1))
    assert charge_operator(b3).to_dense()[i, i] == 4


def test_effective_params():
    p = effective_params(FiveModeParams(1, 1, 10, 10, 100, 100))
    assert (p.lambda1, p.lambda2) == pytest.approx((0.1, 0.1))
    assert effective_params(FiveModeParams(1, 1, 10, 10, -100, 100)).lambda1 == pytest.approx(-0.1)
    p = effective_params(FiveModeParams(0.5, 0.2, 20, 20, 50, 40))
    assert (p.lambda1, p.lambda2, p.eta) == pytest.approx((0.2, 0.1, 0.25))


def test_from_effective_roundtrip():
    for lam1, lam2, d in [(1.0, 1.0, 50.0), (0.3, -0.7, 20.0), (1.0, 0.5, -40.0)]:
        p = effective_params(FiveModeParams.from_effective(lam1, lam2, d))
        assert (p.lambda1, p.lambda2) == pytest.approx((lam1, lam2))


def test_from_three_mode_scaling():
    p = FourModeParams.from_three_mode(ThreeModeParams(0.5, 0.25), 16)
    assert (p.lambda1p, p.lambda2p, p.n0) == pytest.approx((2.0, 1.0, 16))


def test_validation_errors(b3):
    with pytest.raises(ConfigurationError):
        FiveModeParams(1, 1, 1, 1, 0, 1)
    with pytest.raises(ConfigurationError):
        ThreeModeParams(float("nan"), 1)
    with pytest.raises(ConfigurationError):
        ThreeModeParams(0, 1).eta
    with pytest.raises(ConfigurationError):
        build_h5(b3, FiveModeParams(1, 1, 1, 1, 1, 1))
    with pytest.raises(ConfigurationError):
        FourModeParams(1, 1, n0=-2)


def test_basis_helpers():
    assert three_mode_basis(4).modes == THREE_MODES
    assert five_mode_basis(4).modes == FIVE_MODES
    paired = four_mode_basis(4)
    assert paired.modes == FOUR_MODES
    occ = paired.occupations
    assert np.all(occ[:, 0] + occ[:, 2] == occ[:, 1] + occ[:, 3])
    # sector of total pair number N holds (N+1)^2 states
    assert paired.dim == sum((n + 1) ** 2 for n in range(5))
    full = build_basis(FOUR_MODES, TruncationSpec(4))
    assert four_mode_basis(4, paired=False).dim < full.dim
