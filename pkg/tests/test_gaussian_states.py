import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qbm_entanglement import gaussian_states as gs
from qbm_entanglement.errors import UnphysicalStateError, ZeroParameterError

COSH2, SINH2 = math.cosh(2.0), math.sinh(2.0)


def local_ops(draw_vals):
    t1, t2, r1, r2 = draw_vals
    return gs.local_symplectic(gs.rotation(t1) @ gs.squeezer(r1), gs.rotation(t2) @ gs.squeezer(r2))


# ---------------------------------------------------------------------------
# oracle values of the two-mode squeezed vacuum

def test_tmsv_blocks_oracle():
    bl = gs.blocks(gs.two_mode_squeezed_vacuum(1.0))
    assert bl.detA == pytest.approx(3.538530, abs=1e-6)
    assert bl.detB == pytest.approx(3.538530, abs=1e-6)
    # -sinh(2)^2 / 4 = -3.2885291...
    assert bl.detC == pytest.approx(-SINH2 ** 2 / 4, abs=1e-12)
    assert bl.detV == pytest.approx(1 / 16, abs=1e-12)


def test_tmsv_standard_form_oracle():
    sf = gs.standard_form(gs.two_mode_squeezed_vacuum(1.0))
    assert (sf.a, sf.b) == pytest.approx((COSH2 / 2, COSH2 / 2), abs=1e-12)
    assert (sf.c_plus, sf.c_minus) == pytest.approx((SINH2 / 2, -SINH2 / 2), abs=1e-12)


def test_standard_form_recovered_from_rotated_state():
    v = gs.two_mode_squeezed_vacuum(0.7)
    w = gs.transform(v, gs.local_symplectic(gs.rotation(0.3), gs.rotation(-1.1)))
    a, b = gs.standard_form(v), gs.standard_form(w)
    assert (b.a, b.b, b.c_plus, abs(b.c_minus)) == pytest.approx((a.a, a.b, a.c_plus, abs(a.c_minus)), rel=1e-7)


@pytest.mark.parametrize("xi", [0.0, 0.1, 0.5, 1.0, 2.0])
def test_log_negativity_is_twice_squeezing(xi):
    assert gs.log_negativity(gs.two_mode_squeezed_vacuum(xi)) == pytest.approx(2 * xi, abs=1e-10)


def test_simon_of_tmsv():
    # S = -c^2 for a pure symmetric state with c = sinh(2 xi)/2
    for xi in (0.3, 1.0):
        c = math.sinh(2 * xi) / 2
        assert gs.simon_criterion(gs.two_mode_squeezed_vacuum(xi)) == pytest.approx(-c * c, abs=1e-12)


def test_symplectic_spectrum_of_pure_state():
    sp = gs.symplectic_spectrum(gs.two_mode_squeezed_vacuum(1.0))
    assert sp.nu_minus == pytest.approx(0.5, abs=1e-9)
    assert sp.nu_plus == pytest.approx(0.5, abs=1e-9)
    assert sp.nu_tilde_minus == pytest.approx(0.5 * math.exp(-2.0), rel=1e-9)


def test_vacuum_and_thermal_states():
    for v in (gs.vacuum(), gs.thermal_state(0.3, 1.2)):
        assert gs.log_negativity(v) == 0.0
        assert gs.simon_criterion(v) >= 0
        assert gs.separability_verdict(v).is_entangled_ppt is False
    p = gs.purities(gs.thermal_state(1.0))
    assert p.mu1 == pytest.approx(1 / 3) and p.mu == pytest.approx(1 / 9)


def test_entropies_of_tmsv():
    v = gs.two_mode_squeezed_vacuum(0.8)
    s, s1, s2 = gs.von_neumann_entropies(v)
    assert s == pytest.approx(0.0, abs=1e-7)
    assert s1 == pytest.approx(gs.entropy_f(math.cosh(1.6) / 2), rel=1e-9)
    assert gs.mutual_information(v) == pytest.approx(2 * s1, rel=1e-6)
    assert gs.entropy_f(0.5) == 0.0


def test_marginal_entropy_matches_f():
    for nbar in (0.01, 0.5, 3.0):
        mu = 1 / (2 * nbar + 1)
        assert gs.marginal_entropy(mu) == pytest.approx(gs.entropy_f(nbar + 0.5), rel=1e-10)


def test_unphysical_rejected():
    with pytest.raises(UnphysicalStateError):
        gs.check_physical(np.diag([0.3, 0.3, 0.5, 0.5]))
    assert not gs.is_physical(np.diag([0.3, 0.3, 0.5, 0.5]))


def test_covariance_requires_symmetry():
    m = 0.5 * np.eye(4)
    m[0, 1] = 1e-3
    with pytest.raises(ValueError):
        gs.CovarianceMatrix(m)


def test_duan_criteria_on_tmsv():
    v = gs.two_mode_squeezed_vacuum(1.0)
    assert gs.duan_product(v) < 1.0
    lhs, bound = gs.duan_sum(v, -1.0)  # (q1 - q2, p1 + p2) orientation
    assert lhs < bound
    assert gs.duan_sum(v, 1.0)[0] > bound
    a_opt, gap = gs.duan_sum_optimal(v)
    assert a_opt < 0 and gap < 0
    with pytest.raises(ZeroParameterError):
        gs.duan_sum(v, 0.0)


def test_purity_region_of_tmsv_and_thermal():
    assert gs.purity_region(gs.purities(gs.two_mode_squeezed_vacuum(1.0))) is gs.PurityRegion.ENTANGLED
    assert gs.purity_region(gs.purities(gs.thermal_state(1.0))) is gs.PurityRegion.SEPARABLE


def test_covariance_text_round_trip(tmp_path, rng):
    v = gs.random_covariance(rng)
    assert gs.CovarianceMatrix.from_text(v.to_text()) == v
    p = tmp_path / "v.txt"
    v.save(p)
    assert np.array_equal(gs.CovarianceMatrix.load(p).v, v.v)


# ---------------------------------------------------------------------------
# invariants

angles = st.floats(0, 2 * math.pi)
squeezes = st.floats(-1.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(xi=st.floats(0.0, 1.5), ops=st.tuples(angles, angles, squeezes, squeezes),
       nbar=st.floats(0.0, 2.0))
def test_local_symplectic_invariance(xi, ops, nbar):
    v = gs.transform(gs.two_mode_squeezed_vacuum(xi), np.eye(4))
    v = gs.CovarianceMatrix(v.v + nbar * np.eye(4) * 0.1)
    w = gs.transform(v, local_ops(ops))
    a, b = gs.blocks(v), gs.blocks(w)
    scale = max(1.0, abs(a.detA))
    for x, y in ((a.detA, b.detA), (a.detB, b.detB), (a.detC, b.detC), (a.detV, b.detV)):
        assert abs(x - y) <= 1e-10 * scale ** 2
    assert gs.log_negativity(w) == pytest.approx(gs.log_negativity(v), abs=1e-10)
    pv, pw = gs.purities(v), gs.purities(w)
    assert (pw.mu, pw.mu1, pw.mu2) == pytest.approx((pv.mu, pv.mu1, pv.mu2), abs=1e-10)
    assert gs.mutual_information(w) == pytest.approx(gs.mutual_information(v), abs=1e-8)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_random_states_are_physical_and_criteria_agree(seed):
    v = gs.random_covariance(np.random.default_rng(seed))
    ver = gs.separability_verdict(v)
    assert ver.is_entangled_ppt == (ver.simon_S < 0) == (ver.log_negativity > 0)
    nu_m, _ = gs.symplectic_eigenvalues_sym(v)
    assert nu_m >= 0.5 - 1e-9
    assert gs.symplectic_spectrum(v).nu_minus == pytest.approx(nu_m, rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_duan_product_below_one_implies_ppt_entangled(seed):
    v = gs.random_covariance(np.random.default_rng(seed))
    if gs.duan_product(v) < 1.0 - 1e-12:
        assert gs.separability_verdict(v).is_entangled_ppt
