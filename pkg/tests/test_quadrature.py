import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deformed_sine.quadrature import (DomainError, QuadratureError, gauss_legendre, integrate,
                                      integrate_half_line, panels_for, pv_integrate)
from oracle_values import PV_EXP


@given(order=st.integers(2, 24), panels=st.integers(1, 4),
       a=st.floats(-3, 0), length=st.floats(0.1, 4))
@settings(max_examples=60, deadline=None)
def test_polynomial_exactness(order, panels, a, length):
    b = a + length
    g = gauss_legendre(order, a, b, panels)
    deg = 2 * order - 1
    exact = (b ** (deg + 1) - a ** (deg + 1)) / (deg + 1)
    assert integrate(lambda x: x ** deg, g) == pytest.approx(exact, rel=1e-10, abs=1e-10)
    assert g.weights.sum() == pytest.approx(length, rel=1e-13)


def test_refined_doubles_panels():
    g = gauss_legendre(8, 0, 1, 3).refined()
    assert g.panel_count == 6 and g.size == 48


def test_matrix_valued_integrand():
    g = gauss_legendre(16, 0, 1)
    out = integrate(lambda x: np.stack([x, x ** 2], axis=-1), g)
    assert np.allclose(out, [0.5, 1 / 3])


def test_half_line():
    assert integrate_half_line(lambda u: np.exp(-u * u), 7.0) == pytest.approx(np.sqrt(np.pi) / 2, rel=1e-14)


@pytest.mark.parametrize("c", sorted(PV_EXP))
def test_pv_oracle(c):
    g = gauss_legendre(16, -1, 1, 4)
    assert pv_integrate(np.exp, g, c) == pytest.approx(PV_EXP[c], abs=1e-13)


def test_pv_node_on_singular_point():
    g = gauss_legendre(3, -1, 1)  # middle node is 0
    val = pv_integrate(np.exp, g.refined(8), 0.0)
    ref = pv_integrate(np.exp, gauss_legendre(16, -1, 1, 4), 1e-12)
    assert val == pytest.approx(ref, abs=1e-8)
    with pytest.raises(DomainError):
        pv_integrate(None, g, 0.0, h_nodes=np.exp(g.nodes), h_c=1.0)


@given(c=st.floats(-0.9, 0.9), k=st.floats(-3, 3))
@settings(max_examples=40, deadline=None)
def test_pv_linear_in_h(c, k):
    g = gauss_legendre(16, -1, 1, 4)
    a = pv_integrate(np.cos, g, c)
    b = pv_integrate(lambda u: u ** 2, g, c)
    both = pv_integrate(lambda u: np.cos(u) + k * u ** 2, g, c)
    assert both == pytest.approx(a + k * b, abs=1e-11)


def test_domain_errors():
    with pytest.raises(DomainError):
        gauss_legendre(1, 0, 1)
    with pytest.raises(DomainError):
        gauss_legendre(4, 1, 0)
    with pytest.raises(DomainError):
        pv_integrate(np.exp, gauss_legendre(4, -1, 1), 1.0)


def test_non_finite_integrand():
    with pytest.raises(QuadratureError):
        integrate(lambda x: np.full_like(x, np.inf), gauss_legendre(4, 0, 1))


def test_panels_for():
    assert panels_for(1.0, 0.25) == 4
    assert panels_for(1.0, 0.3) == 4
    assert panels_for(0.01, 1.0) == 1
