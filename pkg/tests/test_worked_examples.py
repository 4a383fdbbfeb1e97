"""Small worked examples with closed-form or independently computed answers."""
import numpy as np
import pytest

from deformed_sine import classical_pv, pde_lab, scattering, zs
from deformed_sine.fredholm import (interval_determinant, log_det, refine_until_converged,
                                    resolvent_solve, trace)
from deformed_sine.operators import (Classical, build_conjugated_operator, build_interval_operator,
                                     deformed_kernel_value, sine_kernel_value)
from deformed_sine.quadrature import gauss_legendre, integrate, panels_for, pv_integrate
from deformed_sine.weights import ProfileSpec, WeightSpec, truncation_radius

FERMI1 = WeightSpec("fermi", alpha=1.0)
FERMI_PROFILE = ProfileSpec("fermi_factor")
ERF_1 = 0.84270079294971487  # mpmath.erf(1)


# weights

def test_weight_values():
    assert FERMI1(np.array([0.0]))[0] == 0.5
    assert ProfileSpec("gaussian_square").weight(0.0)(np.array([0.0]))[0] == 1.0
    assert WeightSpec("erf_window", alpha=1.0)(np.array([0.0]))[0] == pytest.approx(ERF_1, abs=1e-15)
    assert FERMI1.derivative(np.array([0.0]))[0] == 0.0
    g = WeightSpec("gaussian_square", y=0.0)
    assert g.derivative(np.array([1.0]))[0] == pytest.approx(-4 / np.e, rel=1e-14)


def test_gaussian_square_radius():
    lam = truncation_radius(WeightSpec("gaussian_square", y=0.0))
    assert lam == pytest.approx((16 * np.log(10)) ** 0.25, abs=1e-9)
    assert WeightSpec("gaussian_square")(np.array([lam + 1]))[0] < 1e-16


# quadrature

def test_two_point_rule():
    g = gauss_legendre(2, -1, 1)
    assert np.allclose(g.nodes, [-1 / np.sqrt(3), 1 / np.sqrt(3)]) and np.allclose(g.weights, 1)
    assert integrate(lambda x: x ** 2, g) == pytest.approx(2 / 3, rel=1e-15)


def test_fermi_mass_self_refinement():
    lam = 3.035
    n = panels_for(lam, 0.25)
    coarse = integrate(FERMI1, gauss_legendre(20, 0, lam, n))
    fine = integrate(FERMI1, gauss_legendre(20, 0, lam, 10 * n))
    assert coarse == pytest.approx(fine, abs=1e-13)


def test_simple_integrals():
    assert integrate(np.ones_like, gauss_legendre(16, 0, 2)) == pytest.approx(2.0)
    assert integrate(lambda u: np.exp(-u * u), gauss_legendre(16, -6, 6, 8)) == pytest.approx(
        np.sqrt(np.pi), rel=1e-14)
    ref = integrate(lambda u: 1 / (np.exp(4 * u * u) + 1), gauss_legendre(16, 0, 3.1, 40))
    assert integrate(lambda u: 1 / (np.exp(4 * u * u) + 1), gauss_legendre(16, 0, 3.1, 8)) == pytest.approx(ref, abs=1e-12)


def test_pv_closed_forms():
    g = gauss_legendre(16, -1, 1, 2)
    assert pv_integrate(np.ones_like, g, 0.0) == pytest.approx(0.0, abs=1e-14)
    assert pv_integrate(np.ones_like, g, 0.5) == pytest.approx(np.log(1 / 3), abs=1e-14)
    assert pv_integrate(lambda u: u, g, 0.0) == pytest.approx(2.0, abs=1e-14)


# operators

def test_sine_kernel_values():
    assert sine_kernel_value(0.3, 0.3) == 1.0
    assert sine_kernel_value(0.5, 0.0) == pytest.approx(2 / np.pi, rel=1e-15)
    assert sine_kernel_value(1.0, 0.0) == pytest.approx(0.0, abs=1e-16)


def test_deformed_diagonal_is_mass():
    mass = 2 * integrate(FERMI1, gauss_legendre(16, 0, truncation_radius(FERMI1), 20))
    assert deformed_kernel_value(FERMI1, 0.4, 0.4) == pytest.approx(mass, abs=1e-14)
    assert isinstance(deformed_kernel_value(FERMI1, 0.4, 0.1), float)


def test_traces():
    assert not np.any(build_interval_operator(Classical(0.0), 1.0).matrix)
    assert trace(build_interval_operator(Classical(0.6), 2.0)) == pytest.approx(0.6 * 2 / np.pi, rel=1e-13)
    mass = 2 * integrate(FERMI1, gauss_legendre(16, 0, truncation_radius(FERMI1), 20))
    t_int = trace(build_interval_operator(FERMI1, 1.0))
    t_conj = trace(build_conjugated_operator(FERMI1, 1.0))
    assert t_int == pytest.approx(mass / np.pi, rel=1e-12)
    assert t_conj == pytest.approx(t_int, abs=1e-10)
    assert not np.any(build_conjugated_operator(WeightSpec("none"), 1.0).matrix)


def test_fermi_spectrum():
    mu = np.linalg.eigvalsh(build_interval_operator(FERMI1, 1.0).matrix)
    assert mu.min() > -1e-14 and mu.max() < 1


# fredholm

def test_small_s_determinants():
    s = 0.01
    assert interval_determinant(Classical(1.0), s).det == pytest.approx(1 - s / np.pi, abs=1e-6)
    c = scattering.trace_constant(FERMI_PROFILE, 0.0)
    assert interval_determinant(FERMI_PROFILE.weight(0.0), s).det == pytest.approx(1 - s * c, abs=1e-5)
    assert trace(build_interval_operator(FERMI_PROFILE.weight(0.0), 1.0)) == pytest.approx(c, abs=1e-10)
    assert interval_determinant(Classical(0.0), 1.0).det == 1.0


def test_resolvent_residual_bound():
    op = build_interval_operator(FERMI1, 3.0)
    rhs = np.exp(op.grid.nodes)
    x = resolvent_solve(op, rhs)
    sw = np.sqrt(op.grid.weights)
    res = x - (op.matrix @ (sw * x)) / sw - rhs
    assert np.abs(res).max() <= 1e-11 * np.abs(rhs).max()
    zero = build_interval_operator(WeightSpec("none"), 1.0)
    assert np.array_equal(resolvent_solve(zero, rhs[:zero.size]), rhs[:zero.size])


def test_lu_matches_eigen_product():
    op = build_interval_operator(FERMI1, 5.0)
    lu = log_det(op, method="lu").det
    eig = np.prod(1 - np.linalg.eigvals(op.matrix)).real
    assert lu == pytest.approx(eig, rel=1e-10)


def test_refinement_examples():
    r = refine_until_converged(lambda o, p: build_interval_operator(WeightSpec("none"), 1.0, o, p))
    assert r.converged and r.log_det == 0.0
    for s in (1.0, 5.0):
        r = refine_until_converged(lambda o, p: build_interval_operator(FERMI1, s, o, p), 1e-10)
        assert r.converged and r.size <= 400
    deltas = []
    prev = log_det(build_interval_operator(Classical(1.0), 1.0, 2, 1)).log_det
    for n in (3, 4, 5, 6):
        cur = log_det(build_interval_operator(Classical(1.0), 1.0, n, 1)).log_det
        deltas.append(abs(cur - prev))
        prev = cur
    ratios = np.array(deltas[1:]) / np.array(deltas[:-1])
    assert np.all(np.diff(ratios) < 0)  # faster than any fixed algebraic rate


# zs

def test_zero_weight_fields():
    f = zs.field_set(WeightSpec("none"), 2.0)
    assert np.allclose(f.F_vec, f.f_vec) and np.allclose(f.G_vec, f.g_vec)
    assert np.allclose(f.phi, np.exp(2j * f.lam)) and np.allclose(f.psi, np.exp(-2j * f.lam))
    rep = zs.verify_trace_identities(f, zs.compute_U1(f))
    assert rep["orthogonality"] == rep["beta"] == rep["gamma"] == 0.0
    # only the centered-difference truncation of e^{is lam} remains
    assert zs.zs_residual(WeightSpec("none"), 2.0, 1e-3)["phi"] < 1e-5


def test_fg_orthogonal_pointwise():
    f = zs.field_set(FERMI1, 1.0)
    assert np.abs(np.einsum("ki,ki->k", f.f_vec, f.g_vec)).max() < 1e-15


def test_F_tends_to_f_linearly():
    errs = []
    for s in (0.04, 0.02, 0.01):
        f = zs.field_set(FERMI1, s)
        errs.append(np.abs(f.F_vec - f.f_vec).max() / np.abs(f.f_vec).max())
    assert errs[0] / errs[1] == pytest.approx(2, rel=0.1) and errs[1] / errs[2] == pytest.approx(2, rel=0.1)


def test_phi_asymptotics_at_grid_ends():
    f = zs.field_set(FERMI1, 1.0)
    dev = np.abs(f.phi * np.exp(-1j * f.lam) - 1)
    n = dev.size
    assert dev[[0, -1]].max() < dev[n // 2]
    # the deviation is O(1/lambda) at the ends
    assert dev[-1] * f.lam[-1] == pytest.approx(dev[0] * abs(f.lam[0]), rel=1e-8)
    assert dev[-1] < 0.05


def test_p_and_u1_limits():
    u = zs.u1_at(FERMI1, 1.0)
    h = 1e-4
    d = (interval_determinant(FERMI1, 1 + h).log_det - interval_determinant(FERMI1, 1 - h).log_det) / (2 * h)
    assert abs(u.p + d) <= 1e-6
    z = zs.u1_at(WeightSpec("none"), 1.0)
    assert z.p == 0 and z.q == 0
    norms = [s * np.linalg.norm(zs.u1_at(FERMI1, s).U1) for s in (1e-2, 1e-3)]
    assert norms[1] < norms[0] / 5


# pde_lab

def test_zero_profile_surface():
    surf = pde_lab.build_sigma_surface(ProfileSpec("none"), [0.0, 0.5, 1.0], [0.5, 1.0, 1.5])
    assert not np.any(surf.sigma)
    inner = np.s_[:, 1:-1]
    assert not np.any(surf.p[inner]) and not np.any(surf.q[inner])


def test_fermi_small_s_slope():
    c = scattering.trace_constant(FERMI_PROFILE, 0.0)
    val = complex(interval_determinant(FERMI_PROFILE.weight(0.0), 0.01).log_det).real / 0.01
    assert val == pytest.approx(-c, rel=0.02)


def test_surface_Q_in_unit_interval_and_q_real():
    surf = pde_lab.build_sigma_surface(FERMI_PROFILE, pde_lab.grid_range(-2, 2, 0.5),
                                       pde_lab.grid_range(0.2, 3.0, 0.2))
    assert np.all((surf.Q > 0) & (surf.Q <= 1))
    assert np.isrealobj(surf.q) and np.isrealobj(surf.q_resolvent)


def test_non_solution_detected():
    yg, sg = pde_lab.grid_range(0.5, 1.5, 0.01), pde_lab.grid_range(0.5, 1.5, 0.01)
    Y, S = np.meshgrid(yg, sg, indexing="ij")
    surf = pde_lab.surface_from_sigma(S ** 3 * Y, yg, sg)
    res, _ = pde_lab.sigma_form_residual(surf)
    exact = 36 * S ** 2 - 24 * S * Y * (-4 * S ** 3 - 9 * S ** 4)
    inner = np.s_[1:-1, 1:-1]
    assert np.allclose(res[inner], exact[inner], rtol=1e-3)
    assert np.abs(res[inner]).min() > 1


def test_p_matches_u1_at_sample():
    surf = pde_lab.build_sigma_surface(FERMI_PROFILE, [-0.05, 0.0, 0.05], pde_lab.grid_range(0.98, 1.02, 0.01))
    u = zs.u1_at(FERMI_PROFILE.weight(0.0), 1.0)
    assert surf.p[1, 2] == pytest.approx(u.p.real, abs=1e-4)
    assert surf.p_resolvent[1, 2] == pytest.approx(u.p.real, abs=1e-10)


# scattering

def test_zero_datum():
    d = scattering.GaussianDatum(0.0)
    assert not np.any(scattering.W_exact(d, np.linspace(-2, 2, 5)))
    rc = scattering.roundtrip_check(d, np.linspace(-1, 1, 3))
    assert rc["sup_error"] == 0.0


def test_W_tail_decay():
    d = scattering.GaussianDatum()
    r = np.array([4.0, 5.0, 6.0])
    assert np.all(np.abs(scattering.W_exact(d, r)) * r ** 4 < np.array([1e-3, 1e-6, 1e-10]))


def test_initial_data_examples():
    d = scattering.GaussianDatum()
    pair = scattering.W_from_f(d, y_max=1.0)
    init = scattering.small_s_initial_data(pair.profile, 0.0)
    assert init.value == pytest.approx(-scattering.trace_constant(pair.profile, 0.0), abs=1e-4)
    assert init.value == pytest.approx(1.0, abs=1e-3)


# classical_pv

def test_small_x_boundary_condition():
    sol = classical_pv.solve_sigma_pv(1.0, 0.1, x_grid=np.array([0.01, 0.02, 0.04]))
    dev = np.abs(sol.nu / sol.x_grid + 1 / np.pi)
    assert dev[1] / dev[0] == pytest.approx(2, rel=0.05) and dev[2] / dev[1] == pytest.approx(2, rel=0.05)


def test_c2_from_fit():
    sol = classical_pv.solve_sigma_pv(1.0, 0.011, x_grid=np.linspace(1e-3, 1e-2, 40))
    x = sol.x_grid
    A = np.stack([x, x ** 2, x ** 3, x ** 4], axis=1)
    coef = np.linalg.lstsq(A, sol.nu, rcond=None)[0]
    assert coef[1] == pytest.approx(-1 / np.pi ** 2, rel=1e-6)


def test_thinned_determinant_examples():
    assert classical_pv.thinned_gap_determinant(0.0, 1.0).det == 1.0
    assert classical_pv.thinned_gap_determinant(1.0, 0.01).det == pytest.approx(1 - 0.01 / np.pi, abs=1e-6)
    for ell in (0.3, 1.0):
        assert 0 < classical_pv.thinned_gap_determinant(ell, 3.0).det < 1
    zero = classical_pv.compare_classical(0.0, [0.5, 1.0])
    assert zero["max_residual1"] == 0.0 and zero["max_residual2"] == 0.0
