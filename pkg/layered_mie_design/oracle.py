"""
Exact scattering of concentric multilayer spheres.

The external Mie coefficients are obtained with the layer recursion of
logarithmic-derivative ratios (Yang, Appl. Opt. 42, 1710 (2003)), which is
stable for every shell and order. The cross-section follows from the usual
sum over multipoles.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from layered_mie_design.common import (DEFAULT_GRID, DEFAULT_HOST_INDEX,
                                       DEFAULT_MATERIAL_CYCLE, DESIGN_BOX,
                                       OracleError)
from layered_mie_design.materials import refractive_index
from layered_mie_design import specfuncs

LOGGER = logging.getLogger(__name__)

UNIT_CROSS_SECTION = 'nm2'
UNIT_EFFICIENCY = 'efficiency'


@dataclass(frozen=True)
class LayerStack:
    """
    Shell thicknesses in nm, innermost first. Materials alternate through
    ``material_cycle`` starting from the core.
    """
    thicknesses: tuple
    material_cycle: tuple = DEFAULT_MATERIAL_CYCLE

    def __post_init__(self):
        thicknesses = tuple(float(value) for value in np.ravel(self.thicknesses))
        if not thicknesses:
            raise ValueError('A LayerStack needs at least one layer')
        for index, value in enumerate(thicknesses):
            if not math.isfinite(value) or value <= 0:
                raise ValueError(
                    f'Thickness of layer {index} must be finite and positive, got {value}'
                )
        if len(self.material_cycle) != 2:
            raise ValueError('material_cycle must hold exactly two materials')
        object.__setattr__(self, 'thicknesses', thicknesses)
        object.__setattr__(self, 'material_cycle', tuple(self.material_cycle))

    @property
    def num_layers(self):
        return len(self.thicknesses)

    @property
    def radii(self):
        """Outer radius of every shell"""
        return np.cumsum(self.thicknesses)

    @property
    def outer_radius(self):
        return float(self.radii[-1])

    def layer_materials(self):
        """Material name of every shell, core first"""
        return [
            self.material_cycle[index % 2] for index in range(self.num_layers)
        ]

    def in_design_box(self, bounds=DESIGN_BOX):
        low, high = bounds
        return all(low <= value <= high for value in self.thicknesses)


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform wavelength grid, end points included"""
    lambda_min: float = DEFAULT_GRID[0]
    lambda_max: float = DEFAULT_GRID[1]
    n_points: int = DEFAULT_GRID[2]

    def __post_init__(self):
        object.__setattr__(self, 'lambda_min', float(self.lambda_min))
        object.__setattr__(self, 'lambda_max', float(self.lambda_max))
        object.__setattr__(self, 'n_points', int(self.n_points))
        if self.lambda_min <= 0:
            raise ValueError('lambda_min must be positive')
        if self.n_points < 1:
            raise ValueError('n_points must be at least 1')
        if self.n_points == 1 and self.lambda_max != self.lambda_min:
            raise ValueError(
                'A single-point grid needs lambda_min == lambda_max')
        if self.n_points > 1 and self.lambda_max <= self.lambda_min:
            raise ValueError('lambda_max must exceed lambda_min')

    @property
    def wavelengths(self):
        return np.linspace(self.lambda_min, self.lambda_max, self.n_points)


@dataclass(frozen=True)
class Spectrum:
    """Scattering cross-section (nm^2) or efficiency sampled on a grid"""
    grid: SpectralGrid
    values: np.ndarray = field(repr=False)
    unit: str = UNIT_CROSS_SECTION

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.size != self.grid.n_points:
            raise ValueError(
                f'Spectrum has {values.size} values for a grid of {self.grid.n_points} points'
            )
        if not np.all(np.isfinite(values)):
            raise ValueError('Spectrum values must be finite')
        if np.any(values < 0):
            raise ValueError('Spectrum values must be nonnegative')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return self.grid.n_points


def max_multipole_order(size_parameter):
    """
    Truncation order of the multipole series for outer size parameter x,
    ceil(x + 4 x^(1/3) + 2), never below 3 (Wiscombe criterion).
    """
    size_parameter = float(size_parameter)
    if not size_parameter > 0:
        raise ValueError(
            f'size_parameter must be positive, got {size_parameter}')
    order = math.ceil(size_parameter + 4.0 * size_parameter**(1.0 / 3.0) +
                      2.0)
    return max(3, int(order))


def _layer_indices(stack, materials, wavelengths):
    """Complex index of every shell, shape (n_wavelengths, n_layers)"""
    columns = []
    for name in stack.layer_materials():
        try:
            table = materials[name]
        except KeyError:
            raise ValueError(f"No refractive index table for material '{name}'")
        columns.append(np.atleast_1d(refractive_index(table, wavelengths)))
    return np.stack(columns, axis=1)


def _check_finite(values, message, layer):
    """Raise OracleError at the first non-finite entry; column 0 is n = 1"""
    bad = ~np.isfinite(values)
    if np.any(bad):
        order = int(np.argwhere(bad)[0][-1]) + 1
        raise OracleError(message, layer=layer, order=order)


def _recursive_coefficients(rel_index, size_params, nmax):
    """
    External coefficients from the layer recursion.

    :param rel_index: relative indices, shape (batch, n_layers)
    :param size_params: k * outer radius of each shell, shape (batch, n_layers)
    :param nmax: highest order
    :return: (a_n, b_n) each of shape (batch, nmax), orders 1..nmax
    """
    num_layers = rel_index.shape[1]

    # Orders 1..nmax only; order 0 is undefined at zeros of sin z
    core = rel_index[:, 0] * size_params[:, 0]
    h_a = specfuncs.log_derivative_d1(core, nmax)[:, 1:]
    h_b = h_a.copy()
    _check_finite(h_a, 'Non-finite logarithmic derivative in the core', 0)

    for layer in range(1, num_layers):
        m_here = rel_index[:, layer, None]
        m_below = rel_index[:, layer - 1, None]
        z_inner = rel_index[:, layer] * size_params[:, layer - 1]
        z_outer = rel_index[:, layer] * size_params[:, layer]

        d1_inner = specfuncs.log_derivative_d1(z_inner, nmax)
        d1_outer = specfuncs.log_derivative_d1(z_outer, nmax)
        d3_inner, _ = specfuncs.log_derivative_d3(z_inner, d1_inner)
        d3_outer, _ = specfuncs.log_derivative_d3(z_outer, d1_outer)
        ratio = specfuncs.psi_xi_ratio(z_inner, z_outer, d1_inner, d3_inner,
                                       d1_outer, d3_outer)[:, 1:]
        d1_inner, d3_inner = d1_inner[:, 1:], d3_inner[:, 1:]
        d1_outer, d3_outer = d1_outer[:, 1:], d3_outer[:, 1:]

        g_1 = m_here * h_a - m_below * d1_inner
        g_2 = m_here * h_a - m_below * d3_inner
        h_a = (g_2 * d1_outer - ratio * g_1 * d3_outer) / (g_2 - ratio * g_1)

        g_1 = m_below * h_b - m_here * d1_inner
        g_2 = m_below * h_b - m_here * d3_inner
        h_b = (g_2 * d1_outer - ratio * g_1 * d3_outer) / (g_2 - ratio * g_1)

        _check_finite(h_a, 'Overflow in the layer recursion', layer)
        _check_finite(h_b, 'Overflow in the layer recursion', layer)

    x_outer = size_params[:, -1]
    m_outer = rel_index[:, -1, None]
    psi, xi = specfuncs.riccati_psi_xi(x_outer, nmax)
    orders = np.arange(1, nmax + 1)[None, :]
    shift = orders / x_outer[:, None]

    factor_a = h_a / m_outer + shift
    factor_b = h_b * m_outer + shift
    a_n = (factor_a * psi[:, 1:] - psi[:, :-1]) / (factor_a * xi[:, 1:] -
                                                   xi[:, :-1])
    b_n = (factor_b * psi[:, 1:] - psi[:, :-1]) / (factor_b * xi[:, 1:] -
                                                   xi[:, :-1])
    _check_finite(a_n, 'Non-finite scattering coefficient', num_layers - 1)
    _check_finite(b_n, 'Non-finite scattering coefficient', num_layers - 1)
    return a_n, b_n


def _prepare(stack, materials, wavelengths, host_index):
    host_index = float(host_index)
    if not host_index > 0:
        raise ValueError(f'host_index must be positive, got {host_index}')
    wavelengths = np.atleast_1d(np.asarray(wavelengths, dtype=float))
    indices = _layer_indices(stack, materials, wavelengths)
    wavenumber = 2.0 * np.pi * host_index / wavelengths
    size_params = wavenumber[:, None] * stack.radii[None, :]
    return indices / host_index, size_params, wavenumber


def mie_coefficients(stack,
                     materials,
                     wavelength,
                     host_index=DEFAULT_HOST_INDEX,
                     nmax=None):
    """
    External Mie coefficients of a layered sphere.

    :param stack: the :class:`LayerStack`
    :param materials: mapping of material name to :class:`MaterialTable`
    :param wavelength: vacuum wavelength in nm
    :param host_index: real refractive index of the host medium
    :param nmax: truncation order, defaults to :func:`max_multipole_order`
        of the outer size parameter
    :return: tuple ``(a_n, b_n)`` of complex arrays for n = 1..nmax
    """
    rel_index, size_params, _ = _prepare(stack, materials, wavelength,
                                         host_index)
    if nmax is None:
        nmax = max_multipole_order(size_params[0, -1])
    a_n, b_n = _recursive_coefficients(rel_index, size_params, nmax)
    return a_n[0], b_n[0]


def cross_section_from_coefficients(a_n, b_n, wavenumber):
    """sigma = 2 pi / k^2 sum (2n + 1) (|a_n|^2 + |b_n|^2)"""
    orders = np.arange(1, np.shape(a_n)[-1] + 1)
    weights = 2 * orders + 1
    total = np.sum(weights * (np.abs(a_n)**2 + np.abs(b_n)**2), axis=-1)
    return 2.0 * np.pi / np.asarray(wavenumber)**2 * total


def scattering_cross_section(stack,
                             materials,
                             wavelength,
                             host_index=DEFAULT_HOST_INDEX,
                             nmax=None):
    """Scattering cross-section in nm^2 at one wavelength"""
    a_n, b_n = mie_coefficients(stack, materials, wavelength, host_index,
                                nmax)
    wavenumber = 2.0 * np.pi * float(host_index) / float(wavelength)
    return float(cross_section_from_coefficients(a_n, b_n, wavenumber))


def spectrum(stack,
             materials,
             grid=SpectralGrid(),
             host_index=DEFAULT_HOST_INDEX,
             efficiency=False):
    """
    Scattering spectrum on a wavelength grid.

    All wavelengths are solved together up to the largest order of the grid;
    each wavelength's sum is then truncated at its own
    :func:`max_multipole_order`.
    """
    rel_index, size_params, wavenumber = _prepare(stack, materials,
                                                  grid.wavelengths, host_index)
    own_orders = np.array(
        [max_multipole_order(value) for value in size_params[:, -1]])
    nmax = int(own_orders.max())
    LOGGER.debug('Spectrum of %d layers on %d wavelengths up to order %d',
                 stack.num_layers, grid.n_points, nmax)
    a_n, b_n = _recursive_coefficients(rel_index, size_params, nmax)

    keep = np.arange(1, nmax + 1)[None, :] <= own_orders[:, None]
    a_n = np.where(keep, a_n, 0)
    b_n = np.where(keep, b_n, 0)
    values = cross_section_from_coefficients(a_n, b_n, wavenumber)

    unit = UNIT_CROSS_SECTION
    if efficiency:
        values = values / (np.pi * stack.outer_radius**2)
        unit = UNIT_EFFICIENCY
    return Spectrum(grid, values, unit)
