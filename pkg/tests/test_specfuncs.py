"""
Tests for the Riccati-Bessel helpers, checked against scipy.special
"""
import numpy as np
from scipy.special import spherical_jn, spherical_yn

from layered_mie_design import specfuncs

NMAX = 20


def _scipy_table(func, z, nmax, derivative=False):
    orders = np.arange(nmax + 1)
    return np.array([func(orders, value, derivative=derivative) for value in z])


def test_bessel_recurrences():
    x = np.array([0.3, 1.0, 2.5, 7.0, 15.0, 30.0])
    np.testing.assert_allclose(specfuncs.spherical_jn_downward(x, NMAX),
                               _scipy_table(spherical_jn, x, NMAX),
                               rtol=1e-7,
                               atol=1e-9)
    # y_n is large for n > x, where the upward recurrence is accurate
    np.testing.assert_allclose(specfuncs.spherical_yn_upward(x, NMAX),
                               _scipy_table(spherical_yn, x, NMAX),
                               rtol=1e-9,
                               atol=1e-12)


def test_riccati_functions():
    x = np.array([0.5, 4.0, 12.0])
    psi, xi = specfuncs.riccati_psi_xi(x, 10)
    jn = _scipy_table(spherical_jn, x, 10)
    yn = _scipy_table(spherical_yn, x, 10)
    np.testing.assert_allclose(psi, x[:, None] * jn, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(xi, x[:, None] * (jn + 1j * yn),
                               rtol=1e-9,
                               atol=1e-12)


def _log_derivatives(z, nmax):
    """psi'/psi and xi'/xi from scipy"""
    jn = _scipy_table(spherical_jn, z, nmax)
    djn = _scipy_table(spherical_jn, z, nmax, derivative=True)
    yn = _scipy_table(spherical_yn, z, nmax)
    dyn = _scipy_table(spherical_yn, z, nmax, derivative=True)
    z = z[:, None]
    d1 = (jn + z * djn) / (z * jn)
    hn = jn + 1j * yn
    d3 = (hn + z * (djn + 1j * dyn)) / (z * hn)
    return d1, d3, (z * jn) * (z * hn)


def test_log_derivatives():
    z = np.array([0.8 + 0.0j, 3.0 + 0.1j, 6.5 + 0.02j])
    nmax = 12
    d1 = specfuncs.log_derivative_d1(z, nmax)
    d3, psi_xi = specfuncs.log_derivative_d3(z, d1)
    ref_d1, ref_d3, ref_psi_xi = _log_derivatives(z, nmax)
    np.testing.assert_allclose(d1, ref_d1, rtol=1e-8)
    np.testing.assert_allclose(d3, ref_d3, rtol=1e-8)
    np.testing.assert_allclose(psi_xi, ref_psi_xi, rtol=1e-8)


def test_psi_xi_ratio():
    z_inner = np.array([1.2 + 0.0j, 2.0 + 0.05j])
    z_outer = np.array([2.1 + 0.0j, 3.5 + 0.05j])
    nmax = 8
    d1_inner = specfuncs.log_derivative_d1(z_inner, nmax)
    d1_outer = specfuncs.log_derivative_d1(z_outer, nmax)
    d3_inner, _ = specfuncs.log_derivative_d3(z_inner, d1_inner)
    d3_outer, _ = specfuncs.log_derivative_d3(z_outer, d1_outer)
    ratio = specfuncs.psi_xi_ratio(z_inner, z_outer, d1_inner, d3_inner,
                                   d1_outer, d3_outer)

    def psi_over_xi(z):
        jn = _scipy_table(spherical_jn, z, nmax)
        yn = _scipy_table(spherical_yn, z, nmax)
        return jn / (jn + 1j * yn)

    np.testing.assert_allclose(ratio,
                               psi_over_xi(z_inner) / psi_over_xi(z_outer),
                               rtol=1e-8)


def test_downward_start():
    assert specfuncs.downward_start(5, np.array([2.0])) == 5 + \
        specfuncs.DOWNWARD_PADDING
    assert specfuncs.downward_start(5, np.array([30.2])) == 31 + \
        specfuncs.DOWNWARD_PADDING


def test_zeros_of_sin():
    """Orders n >= 1 stay exact where psi_0 vanishes at either radius"""
    z_inner = np.array([np.pi, 1.3, 2 * np.pi], dtype=complex)
    z_outer = np.array([4.0, 2 * np.pi, 3 * np.pi], dtype=complex)
    nmax = 8
    d1_inner = specfuncs.log_derivative_d1(z_inner, nmax)
    d1_outer = specfuncs.log_derivative_d1(z_outer, nmax)
    d3_inner, psi_xi = specfuncs.log_derivative_d3(z_inner, d1_inner)
    d3_outer, _ = specfuncs.log_derivative_d3(z_outer, d1_outer)
    ratio = specfuncs.psi_xi_ratio(z_inner, z_outer, d1_inner, d3_inner,
                                   d1_outer, d3_outer)

    _, ref_d3, ref_psi_xi = _log_derivatives(z_inner, nmax)
    np.testing.assert_allclose(d3_inner[:, 1:], ref_d3[:, 1:], rtol=1e-8)
    np.testing.assert_allclose(psi_xi[:, 1:], ref_psi_xi[:, 1:], rtol=1e-8)

    def psi_over_xi(z):
        jn = _scipy_table(spherical_jn, z, nmax)
        yn = _scipy_table(spherical_yn, z, nmax)
        return jn / (jn + 1j * yn)

    np.testing.assert_allclose(
        ratio[:, 1:],
        psi_over_xi(z_inner)[:, 1:] / psi_over_xi(z_outer)[:, 1:],
        rtol=1e-8)
