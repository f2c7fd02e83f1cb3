"""
Refractive index tables for the shell materials
"""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from layered_mie_design.common import MaterialDomainError, FileFormatError

LOGGER = logging.getLogger(__name__)

# Constant, lossless defaults. Overridable with table files.
DEFAULT_INDICES = {
    'SiO2': 1.45 + 0j,
    'TiO2': 2.40 + 0j,
}
DEFAULT_DOMAIN = (300.0, 900.0)


@dataclass(frozen=True)
class MaterialTable:
    """
    Wavelength (nm) to complex refractive index mapping, linearly interpolated
    in the real and imaginary parts.
    """
    name: str
    wavelengths: tuple
    indices: tuple

    def __post_init__(self):
        wavelengths = np.asarray(self.wavelengths, dtype=float)
        indices = np.asarray(self.indices, dtype=complex)
        if wavelengths.ndim != 1 or wavelengths.size < 2:
            raise ValueError(
                f"Material '{self.name}' needs at least two samples")
        if wavelengths.shape != indices.shape:
            raise ValueError(
                f"Material '{self.name}': wavelengths and indices differ in length"
            )
        if np.any(np.diff(wavelengths) <= 0):
            raise ValueError(
                f"Material '{self.name}': wavelengths must be strictly increasing"
            )
        if not (np.all(np.isfinite(wavelengths))
                and np.all(np.isfinite(indices))):
            raise ValueError(f"Material '{self.name}' has non-finite samples")
        if np.any(indices.imag < 0):
            raise ValueError(
                f"Material '{self.name}': imaginary part of the index must be >= 0"
            )
        object.__setattr__(self, 'wavelengths', tuple(wavelengths.tolist()))
        object.__setattr__(self, 'indices', tuple(indices.tolist()))

    @classmethod
    def constant(cls, name, index, domain=DEFAULT_DOMAIN):
        """Table with the same index at both ends of the domain"""
        return cls(name, (float(domain[0]), float(domain[1])),
                   (complex(index), complex(index)))

    @property
    def domain(self):
        """(min, max) wavelength covered by the table"""
        return self.wavelengths[0], self.wavelengths[-1]

    def covers(self, wavelengths):
        """Return True if every wavelength lies inside the table"""
        wavelengths = np.asarray(wavelengths, dtype=float)
        low, high = self.domain
        return bool(np.all((wavelengths >= low) & (wavelengths <= high)))


def refractive_index(table, wavelength):
    """
    Interpolate the complex refractive index of a material.

    :param table: a :class:`MaterialTable`
    :param wavelength: wavelength in nm, scalar or array
    :return: complex index with the shape of ``wavelength``
    :raises MaterialDomainError: if any wavelength is outside the table
    """
    query = np.asarray(wavelength, dtype=float)
    low, high = table.domain
    outside = (query < low) | (query > high) | ~np.isfinite(query)
    if np.any(outside):
        bad = np.atleast_1d(query)[np.atleast_1d(outside)][0]
        raise MaterialDomainError(table.name, float(bad), table.domain)
    knots = np.asarray(table.wavelengths)
    values = np.asarray(table.indices)
    real = np.interp(query, knots, values.real)
    imag = np.interp(query, knots, values.imag)
    result = real + 1j * imag
    if np.ndim(wavelength) == 0:
        return complex(result)
    return result


def default_materials():
    """Return the default constant SiO2 / TiO2 tables keyed by name"""
    return {
        name: MaterialTable.constant(name, index)
        for name, index in DEFAULT_INDICES.items()
    }


def read_material_table(path):
    """
    Read a material table file.

    The first line must be ``# material <name>``, followed by rows of
    ``wavelength_nm  n_real  n_imag``.
    """
    path = Path(path)
    with open(path, 'r', encoding='utf-8') as handle:
        lines = handle.readlines()

    if not lines or not lines[0].startswith('#'):
        raise FileFormatError(f"{path}: missing '# material <name>' header")
    header = lines[0].lstrip('#').split()
    if len(header) != 2 or header[0] != 'material':
        raise FileFormatError(f"{path}: malformed header line '{lines[0].strip()}'")
    name = header[1]

    wavelengths = []
    indices = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        fields = line.split()
        if len(fields) != 3:
            raise FileFormatError(
                f"{path}:{lineno}: expected 3 columns, got {len(fields)}")
        try:
            wavelength, n_real, n_imag = (float(value) for value in fields)
        except ValueError:
            raise FileFormatError(f"{path}:{lineno}: non-numeric value")
        wavelengths.append(wavelength)
        indices.append(complex(n_real, n_imag))

    LOGGER.debug("Read %d samples for material %s from %s", len(wavelengths),
                 name, path)
    try:
        return MaterialTable(name, tuple(wavelengths), tuple(indices))
    except ValueError as error:
        raise FileFormatError(f"{path}: {error}")


def write_material_table(table, path):
    """Write a table in the format understood by :func:`read_material_table`"""
    lines = [f"# material {table.name}"]
    for wavelength, index in zip(table.wavelengths, table.indices):
        lines.append(f"{wavelength!r}  {index.real!r}  {index.imag!r}")
    Path(path).write_text('\n'.join(lines) + '\n', encoding='utf-8')


def load_materials(paths=()):
    """Default tables, overridden by any table files given"""
    materials = default_materials()
    for path in paths:
        table = read_material_table(path)
        if table.name in materials:
            LOGGER.info("Overriding default table for %s with %s", table.name,
                        path)
        materials[table.name] = table
    return materials
