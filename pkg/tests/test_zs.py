import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deformed_sine import zs
from deformed_sine.fredholm import interval_determinant
from deformed_sine.weights import ProfileSpec, WeightSpec

FERMI = WeightSpec("fermi", alpha=1.0)


@pytest.fixture(scope="module")
def fermi_fields():
    return zs.field_set(FERMI, 1.0)


def test_convention_calibrated(fermi_fields):
    c = fermi_fields.convention
    assert (c.orientation, c.half_residue) == (1, 1)
    assert c.residual < zs.CALIBRATION_TOL


def test_jump_relation(fermi_fields):
    f = fermi_fields
    J = np.linalg.solve(f.Uminus, f.Uplus)
    w = f.weight(f.lam)
    assert np.abs(J[:, 0, 1] - (1 - w)).max() < 1e-12
    assert np.abs(J[:, 0, 0] - 1).max() < 1e-12
    assert np.abs(J[:, 1, 0]).max() < 1e-12
    assert np.abs(J[:, 1, 1] - 1).max() < 1e-12


def test_unimodular_and_symmetric(fermi_fields):
    f = fermi_fields
    assert np.abs(np.linalg.det(f.Uplus) + 1).max() < 1e-12
    assert np.abs(np.linalg.det(f.Yplus) - 1).max() < 1e-12
    # even weight: psi(lam) = phi(-lam), and phi is conjugate-symmetric
    assert np.abs(f.psi - f.phi[::-1]).max() < 1e-12
    assert np.abs(f.psi - np.conj(f.phi)).max() < 1e-12


def test_u1_matches_log_derivative(fermi_fields):
    u = zs.compute_U1(fermi_fields)
    h = 1e-4
    d = (interval_determinant(FERMI, 1.0 + h).log_det - interval_determinant(FERMI, 1.0 - h).log_det) / (2 * h)
    assert u.p == pytest.approx(-d, abs=1e-8)
    assert u.ratio == pytest.approx(-2.0, abs=1e-6)
    assert u.beta == pytest.approx(-u.gamma, abs=1e-14)
    assert u.q == pytest.approx(1j * u.gamma, abs=1e-14)


@pytest.mark.parametrize("s", [0.5, 2.0])
def test_trace_identities(s):
    f = zs.field_set(FERMI, s)
    rep = zs.verify_trace_identities(f, zs.compute_U1(f))
    for key in ("orthogonality", "beta", "gamma"):
        assert rep[key] < 1e-10, key


def test_zero_weight_is_trivial():
    f = zs.field_set(WeightSpec("none"), 1.0)
    assert np.allclose(f.Yplus, np.eye(2))
    u = zs.compute_U1(f)
    assert np.allclose(u.U1, 0)
    assert np.allclose(np.abs(f.phi), 1)


def test_zs_residual_second_order():
    r1 = zs.zs_residual(FERMI, 1.0, 2e-3)
    r2 = zs.zs_residual(FERMI, 1.0, 1e-3)
    assert np.log2(r1["phi"] / r2["phi"]) == pytest.approx(2.0, abs=0.1)
    assert np.log2(r1["psi"] / r2["psi"]) == pytest.approx(2.0, abs=0.1)


def test_second_log_derivative(fermi_fields):
    assert zs.second_log_derivative(fermi_fields)["residual"] < 1e-7


def test_lax_matrix_traceless():
    lax = zs.lax_pair(ProfileSpec("fermi_factor"), 0.0, 1.0)
    assert np.trace(lax.L) == pytest.approx(0)
    M = lax.M_of(np.array([0.3, -1.0]))
    assert M.shape == (2, 2, 2) and np.allclose(np.trace(M, axis1=1, axis2=2), 0)


@given(s=st.floats(0.3, 3.0))
@settings(max_examples=8, deadline=None)
def test_p_is_minus_log_derivative(s):
    u = zs.u1_at(FERMI, s)
    h = 1e-4 * s
    d = (interval_determinant(FERMI, s + h).log_det - interval_determinant(FERMI, s - h).log_det) / (2 * h)
    assert u.p == pytest.approx(-d, abs=1e-7)
