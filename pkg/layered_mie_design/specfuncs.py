"""
Riccati-Bessel functions and logarithmic derivatives used by the layer
recursion.

All functions work on a leading batch axis (one entry per wavelength) and
return arrays of shape ``(batch, nmax + 1)`` indexed by the order n.
"""
import numpy as np

# Extra orders for starting downward recurrences
DOWNWARD_PADDING = 15
_RESCALE_LIMIT = 1e150


def downward_start(nmax, z):
    """Starting order of the downward recurrences"""
    zmax = float(np.max(np.abs(z))) if np.size(z) else 0.0
    return int(max(nmax, np.ceil(zmax))) + DOWNWARD_PADDING


def spherical_jn_downward(x, nmax):
    """
    Spherical Bessel functions j_n(x), n = 0..nmax, for real x > 0.

    Miller's downward recurrence started at ``nmax + 15`` and normalised to
    whichever of j_0 and j_1 is larger in magnitude.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    nstart = downward_start(nmax, x)
    values = np.zeros((x.size, nstart + 2))
    values[:, nstart] = 1e-30
    for order in range(nstart, 0, -1):
        values[:, order - 1] = (2 * order + 1) / x * values[:, order] \
            - values[:, order + 1]
        big = np.abs(values[:, order - 1]) > _RESCALE_LIMIT
        if np.any(big):
            values[big] /= _RESCALE_LIMIT

    j0 = np.sin(x) / x
    j1 = np.sin(x) / x**2 - np.cos(x) / x
    use_j0 = np.abs(j0) >= np.abs(j1)
    scale = np.where(use_j0, j0 / values[:, 0], j1 / values[:, 1])
    return values[:, :nmax + 1] * scale[:, None]


def spherical_yn_upward(x, nmax):
    """Spherical Bessel functions y_n(x), n = 0..nmax, by upward recurrence"""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    values = np.zeros((x.size, max(nmax, 1) + 1))
    values[:, 0] = -np.cos(x) / x
    values[:, 1] = -np.cos(x) / x**2 - np.sin(x) / x
    for order in range(1, nmax):
        values[:, order + 1] = (2 * order + 1) / x * values[:, order] \
            - values[:, order - 1]
    return values[:, :nmax + 1]


def riccati_psi_xi(x, nmax):
    """
    Riccati-Bessel functions psi_n(x) = x j_n(x) and
    xi_n(x) = x h_n^(1)(x) = x (j_n(x) + i y_n(x)) for real x.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    jn = spherical_jn_downward(x, nmax)
    yn = spherical_yn_upward(x, nmax)
    psi = x[:, None] * jn
    xi = x[:, None] * (jn + 1j * yn)
    return psi, xi


def log_derivative_d1(z, nmax):
    """
    D1_n(z) = psi_n'(z) / psi_n(z) by downward recurrence (complex z).
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    nstart = downward_start(nmax, z)
    current = np.zeros(z.size, dtype=complex)
    result = np.zeros((z.size, nmax + 1), dtype=complex)
    for order in range(nstart, 0, -1):
        current = order / z - 1.0 / (current + order / z)
        if order - 1 <= nmax:
            result[:, order - 1] = current
    return result


def log_derivative_d3(z, d1):
    """
    D3_n(z) = xi_n'(z) / xi_n(z) by upward recurrence through the product
    psi_n xi_n.

    :param z: complex arguments, shape (batch,)
    :param d1: output of :func:`log_derivative_d1` for the same ``z``
    :return: tuple (D3, psi_n xi_n)
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    nmax = d1.shape[1] - 1
    d3 = np.zeros_like(d1)
    psi_xi = np.zeros_like(d1)
    phase = np.exp(2j * z)
    psi_xi[:, 0] = 0.5 * (1.0 - phase)
    d3[:, 0] = 1j
    if nmax == 0:
        return d3, psi_xi
    # Order 1 in closed form; D1_0 is infinite where sin z = 0
    psi_xi[:, 1] = -(z + 1j) / z**2 * (0.5j * (1.0 - phase) - 0.5 * z *
                                       (1.0 + phase))
    d3[:, 1] = d1[:, 1] + 1j / psi_xi[:, 1]
    for order in range(2, nmax + 1):
        psi_xi[:, order] = psi_xi[:, order - 1] \
            * (order / z - d1[:, order - 1]) * (order / z - d3[:, order - 1])
        d3[:, order] = d1[:, order] + 1j / psi_xi[:, order]
    return d3, psi_xi


def psi_xi_ratio(z_inner, z_outer, d1_inner, d3_inner, d1_outer, d3_outer):
    """
    Q_n = [psi_n(z_inner) / xi_n(z_inner)] / [psi_n(z_outer) / xi_n(z_outer)]
    for the two radii bounding one shell.

    The recurrence is seeded at n = 1. Q_0 is undefined (0 or infinite)
    where sin z vanishes at either radius; the layer recursion never uses it.
    Both exponentials below have modulus at most one for Im(m) >= 0.
    """
    z_inner = np.atleast_1d(np.asarray(z_inner, dtype=complex))
    z_outer = np.atleast_1d(np.asarray(z_outer, dtype=complex))
    nmax = d1_inner.shape[1] - 1
    orders = np.arange(nmax + 1)

    outer_phase = np.exp(2j * z_outer)
    shell_phase = np.exp(2j * (z_outer - z_inner))
    ratio = np.empty_like(d1_inner)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio[:, 0] = (shell_phase - outer_phase) / (1.0 - outer_phase)
    if nmax == 0:
        return ratio

    q1 = ((outer_phase - shell_phase) - 1j * z_inner *
          (outer_phase + shell_phase)) * (z_outer + 1j) \
        / (((outer_phase - 1.0) - 1j * z_outer *
            (outer_phase + 1.0)) * (z_inner + 1j))
    n_in = orders[None, 2:] / z_inner[:, None]
    n_out = orders[None, 2:] / z_outer[:, None]
    factors = ((d3_inner[:, 2:] + n_in) * (d1_outer[:, 2:] + n_out)) \
        / ((d1_inner[:, 2:] + n_in) * (d3_outer[:, 2:] + n_out))

    ratio[:, 1] = q1
    ratio[:, 2:] = q1[:, None] * np.cumprod(factors, axis=1)
    return ratio
