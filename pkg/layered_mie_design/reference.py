"""
Independent reference solver for layered spheres.

For every multipole order the tangential field continuity conditions at all
interfaces are assembled into one dense linear system and solved directly.
This is slow and less robust than the layer recursion in
:mod:`layered_mie_design.oracle` but shares none of its code, so the two are
used to verify each other. Ill-conditioned systems, as met with strongly
absorbing shells, raise :class:`~layered_mie_design.common.OracleError`
instead of returning a solution.
"""
import warnings

import numpy as np
from scipy import linalg
from scipy.special import spherical_jn, spherical_yn

from layered_mie_design.common import DEFAULT_HOST_INDEX, OracleError
from layered_mie_design.materials import refractive_index
from layered_mie_design.oracle import max_multipole_order


def _riccati(order, z):
    """psi, psi', chi, chi' with psi = z j_n(z), chi = z y_n(z)"""
    j_n = spherical_jn(order, z)
    dj_n = spherical_jn(order, z, derivative=True)
    y_n = spherical_yn(order, z)
    dy_n = spherical_yn(order, z, derivative=True)
    return z * j_n, j_n + z * dj_n, z * y_n, y_n + z * dy_n


def _order_coefficient(order, rel_index, size_params, electric):
    """
    Solve the boundary conditions of one order and polarisation.

    Unknowns: core psi amplitude, (psi, chi) amplitudes of every shell and the
    scattering coefficient. Shell basis functions are normalised at the radius
    where they are largest so the matrix stays well scaled.
    """
    num_layers = len(rel_index)
    size = 2 * num_layers
    matrix = np.zeros((size, size), dtype=complex)
    rhs = np.zeros(size, dtype=complex)

    # Column of the psi / chi amplitude of each shell
    psi_col = [0] + [2 * layer - 1 for layer in range(1, num_layers)]
    chi_col = [None] + [2 * layer for layer in range(1, num_layers)]
    scat_col = size - 1

    # Normalisation of each shell's basis functions
    psi_norm = []
    chi_norm = []
    for layer in range(num_layers):
        z_outer = rel_index[layer] * size_params[layer]
        psi_norm.append(_riccati(order, z_outer)[0])
        if layer == 0:
            chi_norm.append(None)
        else:
            z_inner = rel_index[layer] * size_params[layer - 1]
            chi_norm.append(_riccati(order, z_inner)[2])

    for interface in range(num_layers):
        row_value = 2 * interface
        row_deriv = row_value + 1
        n_in = rel_index[interface]
        n_out = rel_index[interface + 1] if interface + 1 < num_layers else 1.0
        # Value and derivative weights of inner / outer sides
        if electric:
            w_val_in, w_val_out, w_der_in, w_der_out = n_in, n_out, 1.0, 1.0
        else:
            w_val_in, w_val_out, w_der_in, w_der_out = 1.0, 1.0, n_in, n_out

        psi, dpsi, chi, dchi = _riccati(order, n_in * size_params[interface])
        matrix[row_value, psi_col[interface]] = w_val_in * psi / psi_norm[interface]
        matrix[row_deriv, psi_col[interface]] = w_der_in * dpsi / psi_norm[interface]
        if chi_col[interface] is not None:
            matrix[row_value, chi_col[interface]] = w_val_in * chi / chi_norm[interface]
            matrix[row_deriv, chi_col[interface]] = w_der_in * dchi / chi_norm[interface]

        if interface + 1 < num_layers:
            outer = interface + 1
            psi, dpsi, chi, dchi = _riccati(order, n_out * size_params[interface])
            matrix[row_value, psi_col[outer]] = -w_val_out * psi / psi_norm[outer]
            matrix[row_deriv, psi_col[outer]] = -w_der_out * dpsi / psi_norm[outer]
            matrix[row_value, chi_col[outer]] = -w_val_out * chi / chi_norm[outer]
            matrix[row_deriv, chi_col[outer]] = -w_der_out * dchi / chi_norm[outer]
        else:
            # Host: psi(x) - a xi(x), xi = psi + i chi; unknown is a xi(x)
            x_outer = size_params[interface]
            psi, dpsi, chi, dchi = _riccati(order, x_outer)
            xi, dxi = psi + 1j * chi, dpsi + 1j * dchi
            matrix[row_value, scat_col] = w_val_out
            matrix[row_deriv, scat_col] = w_der_out * dxi / xi
            rhs[row_value] = w_val_out * psi
            rhs[row_deriv] = w_der_out * dpsi

    row_scale = np.max(np.abs(matrix), axis=1)
    row_scale[row_scale == 0] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter('error', linalg.LinAlgWarning)
        try:
            solution = linalg.solve(matrix / row_scale[:, None],
                                    rhs / row_scale)
        except (linalg.LinAlgWarning, linalg.LinAlgError, ValueError) as error:
            raise OracleError(f'Unreliable boundary solve: {error}',
                              order=order) from error
    x_outer = size_params[-1]
    psi, _, chi, _ = _riccati(order, x_outer)
    return solution[scat_col] / (psi + 1j * chi)


def direct_mie_coefficients(stack,
                            materials,
                            wavelength,
                            host_index=DEFAULT_HOST_INDEX,
                            nmax=None):
    """
    External coefficients (a_n, b_n), n = 1..nmax, by direct solution of the
    boundary conditions.
    """
    wavelength = float(wavelength)
    host_index = float(host_index)
    wavenumber = 2.0 * np.pi * host_index / wavelength
    size_params = wavenumber * stack.radii
    rel_index = np.array([
        refractive_index(materials[name], wavelength) / host_index
        for name in stack.layer_materials()
    ])
    if nmax is None:
        nmax = max_multipole_order(size_params[-1])
    a_n = np.array([
        _order_coefficient(order, rel_index, size_params, electric=True)
        for order in range(1, nmax + 1)
    ])
    b_n = np.array([
        _order_coefficient(order, rel_index, size_params, electric=False)
        for order in range(1, nmax + 1)
    ])
    return a_n, b_n


def direct_scattering_cross_section(stack,
                                    materials,
                                    wavelength,
                                    host_index=DEFAULT_HOST_INDEX):
    """Cross-section in nm^2 from :func:`direct_mie_coefficients`"""
    a_n, b_n = direct_mie_coefficients(stack, materials, wavelength,
                                       host_index)
    orders = np.arange(1, len(a_n) + 1)
    wavenumber = 2.0 * np.pi * float(host_index) / float(wavelength)
    total = np.sum((2 * orders + 1) * (np.abs(a_n)**2 + np.abs(b_n)**2))
    return float(2.0 * np.pi / wavenumber**2 * total)
