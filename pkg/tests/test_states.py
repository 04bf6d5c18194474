import cmath
import math

import numpy as np
import pytest
from scipy.stats import poisson

from amlaser.errors import ConfigurationError
from amlaser.fock import ModeSet, TruncationSpec, annihilation, build_basis
from amlaser.models import three_mode_basis
from amlaser.states import (
    TRUNCATION_FLAG,
    CoherentSpec,
    SqueezeSpec,
    TwoModeSqueezeSpec,
    coherent,
    default_cutoff,
    default_pair_cutoff,
    fock,
    prepare,
    product,
    squeezed,
    two_mode_squeezed_vacuum,
    vacuum,
)


def single(cutoff, label="c"):
    return build_basis(ModeSet((label,)), TruncationSpec(cutoff))


def moments(psi, mode):
    n = psi.basis.occupation(mode).astype(float)
    p = psi.probabilities
    return p @ n, p @ n**2


def squeezed_vacuum_amplitudes(r, phi_s, nmax):
    """Closed-form even amplitudes of exp(xi a^dag^2 - xi^* a^2)|0>, xi = (r/2) e^{-i phi_s}."""
    out = np.zeros(nmax + 1, dtype=complex)
    if r == 0:
        out[0] = 1
        return out
    t = math.tanh(r)
    for k in range(nmax // 2 + 1):
        log_mag = (k * math.log(t) + 0.5 * math.lgamma(2 * k + 1) - k * math.log(2)
                   - math.lgamma(k + 1) - 0.5 * math.log(math.cosh(r)))
        out[2 * k] = cmath.exp(-1j * k * phi_s) * math.exp(log_mag)
    return out


def test_vacuum_and_fock():
    b = three_mode_basis(4)
    v = vacuum(b)
    assert v.amplitudes[b.index_of((0, 0, 0))] == 1 and v.norm == pytest.approx(1)
    f = fock(b, (2, 0, 0))
    assert np.count_nonzero(f.amplitudes) == 1
    with pytest.raises(ConfigurationError):
        fock(b, (5, 0, 0))


def test_coherent_moments_and_phase():
    b = single(20)
    assert np.allclose(coherent(b, CoherentSpec("c", 0.0)).amplitudes, vacuum(b).amplitudes)
    psi = coherent(b, CoherentSpec("c", 2.0, 0.7))
    mean, _ = moments(psi, "c")
    assert mean == pytest.approx(4.0, abs=1e-6)
    ac = psi.expect(annihilation(b, "c"))
    assert ac == pytest.approx(2.0 * cmath.exp(0.7j), abs=1e-6)
    assert psi.norm_deficit == pytest.approx(poisson.sf(20, 4.0), rel=1e-6)


def test_squeezed_vacuum_matches_closed_form():
    r, phi = 0.5, 0.3
    b = single(40)
    psi = squeezed(b, SqueezeSpec("c", r, phi))
    assert np.allclose(psi.amplitudes, squeezed_vacuum_amplitudes(r, phi, 40), atol=1e-12)
    assert np.all(psi.amplitudes[1::2] == 0)
    mean, sq = moments(psi, "c")
    sh2 = math.sinh(r) ** 2
    assert mean == pytest.approx(sh2, abs=1e-6)
    assert sq - mean**2 == pytest.approx(2 * sh2 * math.cosh(r) ** 2, abs=1e-6)


def test_zero_squeeze_is_coherent():
    b = single(20)
    disp = CoherentSpec("c", 1.5, 0.4)
    psi = squeezed(b, SqueezeSpec("c", 0.0, 0.0, disp))
    assert np.allclose(psi.amplitudes, coherent(b, disp).amplitudes, atol=1e-12)


def test_tmsv_moments_and_correlation():
    b = build_basis(ModeSet(("a1", "a2")), TruncationSpec(30))
    psi = two_mode_squeezed_vacuum(b, TwoModeSqueezeSpec(("a1", "a2"), 1.0))
    n1, _ = moments(psi, "a1")
    n2, _ = moments(psi, "a2")
    assert n1 == pytest.approx(math.sinh(1) ** 2, abs=1e-4)
    assert n2 == pytest.approx(n1, abs=1e-15)
    d = psi.basis.occupation("a1") - psi.basis.occupation("a2")
    assert float(psi.probabilities @ d**2) == 0.0
    # geometric amplitudes tanh^n / cosh on the diagonal, renormalized after the cut at 30
    t = math.tanh(1.0)
    kept = 1.0 - t ** (2 * 31)
    assert psi.norm_deficit == pytest.approx(1.0 - kept, rel=1e-8)
    for n in range(5):
        expected = t**n / math.cosh(1.0) / math.sqrt(kept)
        assert psi.amplitudes[b.index_of((n, n))] == pytest.approx(expected, abs=1e-12)
    vac = two_mode_squeezed_vacuum(b, TwoModeSqueezeSpec(("a1", "a2"), 0.0))
    assert np.allclose(vac.amplitudes, vacuum(b).amplitudes)


def test_product_basic():
    bc, bb = single(3, "c"), single(3, "b")
    joint = product([vacuum(bc), vacuum(bb)])
    assert joint.amplitudes[joint.basis.index_of((0, 0))] == 1
    b = three_mode_basis(12)
    psi = prepare(b, [CoherentSpec("c", 1.0)])
    assert moments(psi, "b")[0] == 0 and moments(psi, "g")[0] == 0


def test_product_deficit_matches_direct_joint_construction():
    # charge cut at 8 drops the coherent tail; deficit must equal the lost Poisson mass
    b = three_mode_basis(8)
    psi = prepare(b, [CoherentSpec("c", 2.0)], threshold=1.0)
    lost = poisson.sf(8, 4.0)
    assert psi.norm_deficit == pytest.approx(lost, rel=1e-9)
    direct = np.zeros(b.dim, dtype=complex)
    for n in range(9):
        direct[b.index_of((n, 0, 0))] = math.exp(-2.0) * 2.0**n / math.sqrt(math.factorial(n))
    direct /= np.linalg.norm(direct)
    assert np.allclose(psi.amplitudes, direct, atol=1e-14)
    flagged = prepare(b, [CoherentSpec("c", 2.0)])
    assert TRUNCATION_FLAG in flagged.flags


def test_default_cutoffs():
    assert default_cutoff(alpha_mag=2.0) == 21
    assert default_cutoff(alpha_mag=1.0) == 13
    assert default_cutoff(r=0.5) == 30
    assert default_cutoff(r=1.0) == 84
    assert default_pair_cutoff(1.0) == 33
    k = np.arange(401)
    w = k * (k - 1) * (k - 2) * (k - 3)
    for r in (0.3, 0.5, 1.0):
        n = default_cutoff(r=r)
        assert n >= max(12, 10 * math.sinh(r) ** 2)
        p = np.abs(squeezed_vacuum_amplitudes(r, 0.0, 400)) ** 2
        assert np.sum(p[n + 1:]) < 1e-8
        assert np.sum((w * p)[n + 1:]) < 1e-6 * np.sum(w * p)
        # one below the default fails a bar
        assert np.sum(p[n:]) >= 1e-8 or np.sum((w * p)[n:]) >= 1e-6 * np.sum(w * p)
    n = default_cutoff(alpha_mag=2.0)
    assert poisson.sf(n, 4.0) < 1e-8


def test_prepare_rejects_bad_specs():
    b = three_mode_basis(4)
    with pytest.raises(ConfigurationError):
        prepare(b, [CoherentSpec("c", 1.0), ("c", 1)])
    with pytest.raises(ConfigurationError):
        SqueezeSpec("c", -0.1)
    with pytest.raises(ConfigurationError):
        TwoModeSqueezeSpec(("a1", "a1"), 1.0)
    with pytest.raises(Exception):
        prepare(b, [CoherentSpec("z", 1.0)])


def test_state_json_export():
    b = single(3)
    rows = fock(b, (2,)).to_json()
    assert rows == [[[2], 1.0, 0.0]]
