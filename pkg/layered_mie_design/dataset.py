"""
Generation, splitting, normalisation and persistence of (stack, spectrum)
datasets computed with the exact oracle
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from layered_mie_design import __version__
from layered_mie_design.artifacts import write_bytes
from layered_mie_design.common import (DATASET_MAGIC, DEFAULT_HOST_INDEX,
                                       DEFAULT_MATERIAL_CYCLE, DESIGN_BOX,
                                       DatasetGenerationError,
                                       FileFormatError, LayeredMieError,
                                       MaterialDomainError,
                                       NormalizationError)
from layered_mie_design.fileformat import decode_container, encode_container
from layered_mie_design.materials import MaterialTable
from layered_mie_design.oracle import (UNIT_CROSS_SECTION, UNIT_EFFICIENCY,
                                       LayerStack, SpectralGrid, spectrum)

LOGGER = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.90, 0.05, 0.05)
_SPLIT_TOLERANCE = 1e-9
# Records computed per joblib task
CHUNK_SIZE = 64


def materials_to_header(materials):
    """JSON friendly description of material tables"""
    return {
        name: {
            'wavelengths': list(table.wavelengths),
            'real': [value.real for value in table.indices],
            'imag': [value.imag for value in table.indices],
        }
        for name, table in sorted(materials.items())
    }


def materials_from_header(data):
    try:
        return {
            name: MaterialTable(
                name, tuple(entry['wavelengths']),
                tuple(complex(re, im)
                      for re, im in zip(entry['real'], entry['imag'])))
            for name, entry in data.items()
        }
    except (KeyError, TypeError, ValueError) as error:
        raise FileFormatError(f'Invalid material tables in header: {error}')


@dataclass(frozen=True)
class DatasetManifest:
    """Everything needed to regenerate a dataset"""
    num_layers: int
    grid: SpectralGrid
    materials: dict = field(repr=False)
    material_cycle: tuple = DEFAULT_MATERIAL_CYCLE
    host_index: float = DEFAULT_HOST_INDEX
    seed: int = 0
    unit: str = UNIT_CROSS_SECTION
    bounds: tuple = DESIGN_BOX
    count: int = 0

    def to_dict(self):
        return {
            'num_layers': self.num_layers,
            'grid': [self.grid.lambda_min, self.grid.lambda_max,
                     self.grid.n_points],
            'materials': materials_to_header(self.materials),
            'material_cycle': list(self.material_cycle),
            'host_index': self.host_index,
            'seed': self.seed,
            'unit': self.unit,
            'bounds': list(self.bounds),
            'count': self.count,
        }

    @classmethod
    def from_dict(cls, m_dict):
        return cls(num_layers=int(m_dict['num_layers']),
                   grid=SpectralGrid(*m_dict['grid']),
                   materials=materials_from_header(m_dict['materials']),
                   material_cycle=tuple(m_dict['material_cycle']),
                   host_index=float(m_dict['host_index']),
                   seed=int(m_dict['seed']),
                   unit=m_dict['unit'],
                   bounds=tuple(m_dict['bounds']),
                   count=int(m_dict['count']))


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Records stored as two arrays: thicknesses (count, num_layers) in nm and
    spectra (count, n_points) in the manifest unit
    """
    manifest: DatasetManifest
    thicknesses: np.ndarray = field(repr=False)
    spectra: np.ndarray = field(repr=False)

    def __post_init__(self):
        manifest = self.manifest
        thicknesses = np.array(self.thicknesses, dtype=float).reshape(
            -1, manifest.num_layers)
        spectra = np.array(self.spectra, dtype=float).reshape(
            -1, manifest.grid.n_points)
        if len(thicknesses) != len(spectra):
            raise ValueError('Number of stacks and spectra differ')
        if len(thicknesses) != manifest.count:
            raise ValueError(
                f'Manifest declares {manifest.count} records, got {len(thicknesses)}'
            )
        thicknesses.setflags(write=False)
        spectra.setflags(write=False)
        object.__setattr__(self, 'thicknesses', thicknesses)
        object.__setattr__(self, 'spectra', spectra)

    def __len__(self):
        return self.manifest.count

    def stack(self, index):
        return LayerStack(self.thicknesses[index], self.manifest.material_cycle)

    def stacks(self):
        return [self.stack(index) for index in range(len(self))]

    def subset(self, indices):
        """New dataset holding the records at ``indices``, in that order"""
        indices = np.asarray(indices, dtype=int)
        return Dataset(replace(self.manifest, count=len(indices)),
                       self.thicknesses[indices], self.spectra[indices])


def sample_stack(rng_seed,
                 index,
                 num_layers,
                 bounds=DESIGN_BOX,
                 material_cycle=DEFAULT_MATERIAL_CYCLE):
    """
    Random stack with i.i.d. uniform thicknesses.

    The draw depends only on ``(rng_seed, index)``.
    """
    low, high = (float(value) for value in bounds)
    if not (math.isfinite(low) and math.isfinite(high)) or low > high \
            or low <= 0:
        raise ValueError(f'Invalid thickness bounds: {bounds}')
    if num_layers < 1:
        raise ValueError(f'num_layers must be at least 1, got {num_layers}')
    if rng_seed < 0 or index < 0:
        raise ValueError('rng_seed and index must be nonnegative')
    rng = np.random.default_rng([int(rng_seed), int(index)])
    return LayerStack(tuple(rng.uniform(low, high, num_layers)),
                      material_cycle)


def _generate_chunk(indices, manifest):
    """
    Compute the records of one chunk. Failures are returned rather than
    raised so they cross process boundaries intact.
    """
    thicknesses = []
    spectra = []
    for index in indices:
        try:
            stack = sample_stack(manifest.seed, index, manifest.num_layers,
                                 manifest.bounds, manifest.material_cycle)
            values = spectrum(stack,
                              manifest.materials,
                              manifest.grid,
                              manifest.host_index,
                              efficiency=manifest.unit == UNIT_EFFICIENCY)
        except (LayeredMieError, ValueError) as error:
            return None, (index, f'{type(error).__name__}: {error}')
        thicknesses.append(stack.thicknesses)
        spectra.append(values.values)
    return (np.array(thicknesses), np.array(spectra)), None


def generate_dataset(count,
                     num_layers,
                     grid,
                     materials,
                     seed,
                     workers=1,
                     host_index=DEFAULT_HOST_INDEX,
                     material_cycle=DEFAULT_MATERIAL_CYCLE,
                     bounds=DESIGN_BOX,
                     efficiency=False):
    """
    Generate ``count`` random records with the exact oracle.

    :param count: number of records, at least 1
    :param num_layers: shells per stack
    :param grid: the :class:`SpectralGrid`
    :param materials: mapping of material name to table
    :param seed: base seed; record ``i`` uses ``sample_stack(seed, i)``
    :param workers: joblib worker processes, the result does not depend on it
    :raises DatasetGenerationError: with the index of the first failing record
    """
    if count < 1:
        raise ValueError(f'count must be at least 1, got {count}')
    if workers < 1:
        raise ValueError(f'workers must be at least 1, got {workers}')
    missing = [name for name in material_cycle if name not in materials]
    if missing:
        raise ValueError(f'No refractive index table for materials {missing}')
    wavelengths = grid.wavelengths
    for name in sorted(set(material_cycle)):
        table = materials[name]
        if not table.covers(wavelengths):
            low, high = table.domain
            outside = wavelengths[(wavelengths < low) | (wavelengths > high)]
            # Every record would fail on the first one
            raise DatasetGenerationError(
                0, MaterialDomainError(name, float(outside[0]), table.domain))

    manifest = DatasetManifest(
        num_layers=int(num_layers),
        grid=grid,
        materials={name: materials[name]
                   for name in sorted(set(material_cycle))},
        material_cycle=tuple(material_cycle),
        host_index=float(host_index),
        seed=int(seed),
        unit=UNIT_EFFICIENCY if efficiency else UNIT_CROSS_SECTION,
        bounds=tuple(float(value) for value in bounds),
        count=int(count))

    LOGGER.info('Generating %d records with %d layers using %d worker(s)',
                count, num_layers, workers)
    chunks = [
        range(start, min(start + CHUNK_SIZE, count))
        for start in range(0, count, CHUNK_SIZE)
    ]
    parallel = Parallel(n_jobs=workers, return_as='generator')
    results = parallel(
        delayed(_generate_chunk)(chunk, manifest) for chunk in chunks)

    thicknesses = []
    spectra = []
    done = 0
    next_report = 0.1
    for result, failure in results:
        if failure is not None:
            index, cause = failure
            raise DatasetGenerationError(index, cause)
        thicknesses.append(result[0])
        spectra.append(result[1])
        done += len(result[0])
        while done / count >= next_report - 1e-12 and next_report <= 1.0:
            LOGGER.info('Generated %d / %d records', done, count)
            next_report += 0.1

    return Dataset(manifest, np.concatenate(thicknesses),
                   np.concatenate(spectra))


def split_sizes(count, fractions=DEFAULT_FRACTIONS):
    """Sizes of the (train, val, test) parts: floor, floor, remainder"""
    if len(fractions) != 3:
        raise ValueError('fractions must hold three values')
    if any(value <= 0 for value in fractions):
        raise ValueError(f'fractions must be positive, got {fractions}')
    if abs(sum(fractions) - 1.0) > _SPLIT_TOLERANCE:
        raise ValueError(f'fractions must sum to 1, got {sum(fractions)}')
    n_train = int(math.floor(count * fractions[0] + _SPLIT_TOLERANCE))
    n_val = int(math.floor(count * fractions[1] + _SPLIT_TOLERANCE))
    n_test = count - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(
            f'Splitting {count} records by {fractions} leaves an empty part '
            f'({n_train}/{n_val}/{n_test})')
    return n_train, n_val, n_test


def split_dataset(dataset, fractions=DEFAULT_FRACTIONS, seed=0):
    """
    Shuffle with ``seed`` and split into disjoint train, validation and test
    datasets
    """
    n_train, n_val, _ = split_sizes(len(dataset), fractions)
    order = np.random.default_rng(seed).permutation(len(dataset))
    return (dataset.subset(order[:n_train]),
            dataset.subset(order[n_train:n_train + n_val]),
            dataset.subset(order[n_train + n_val:]))


@dataclass(frozen=True, eq=False)
class Normalizer:
    """
    Affine map of thicknesses onto [-1, 1] and division of spectra by the
    training maximum
    """
    input_shift: np.ndarray
    input_scale: np.ndarray
    output_scale: float

    def __post_init__(self):
        shift = np.array(self.input_shift, dtype=float).ravel()
        scale = np.array(self.input_scale, dtype=float).ravel()
        if shift.shape != scale.shape:
            raise ValueError('input_shift and input_scale differ in length')
        if np.any(scale <= 0):
            raise ValueError('input_scale must be positive')
        if not self.output_scale > 0 or not math.isfinite(self.output_scale):
            raise NormalizationError(
                f'Output scale must be positive and finite, got {self.output_scale}'
            )
        for array in (shift, scale):
            array.setflags(write=False)
        object.__setattr__(self, 'input_shift', shift)
        object.__setattr__(self, 'input_scale', scale)
        object.__setattr__(self, 'output_scale', float(self.output_scale))

    @property
    def num_layers(self):
        return self.input_shift.size

    def apply_input(self, thicknesses):
        return (np.asarray(thicknesses, dtype=float) -
                self.input_shift) / self.input_scale

    def invert_input(self, normalized):
        return np.asarray(normalized,
                          dtype=float) * self.input_scale + self.input_shift

    def apply_output(self, spectra):
        return np.asarray(spectra, dtype=float) / self.output_scale

    def invert_output(self, normalized):
        return np.asarray(normalized, dtype=float) * self.output_scale

    def to_dict(self):
        return {
            'input_shift': self.input_shift.tolist(),
            'input_scale': self.input_scale.tolist(),
            'output_scale': self.output_scale,
        }

    @classmethod
    def from_dict(cls, m_dict):
        return cls(m_dict['input_shift'], m_dict['input_scale'],
                   m_dict['output_scale'])


def fit_normalizer(train):
    """
    Fit a :class:`Normalizer` on a training split.

    The input map sends the design box to [-1, 1]; the output scale is the
    largest spectrum value of the split.
    """
    if len(train) == 0:
        raise NormalizationError('Cannot fit a normalizer on an empty split')
    peak = float(np.max(train.spectra))
    if not peak > 0:
        raise NormalizationError(
            'All training spectra are zero, the output scale is undefined')
    low, high = train.manifest.bounds
    num_layers = train.manifest.num_layers
    centre = 0.5 * (low + high)
    half_width = 0.5 * (high - low)
    if half_width == 0:
        raise NormalizationError(
            'Degenerate thickness bounds, the input scale is undefined')
    return Normalizer(np.full(num_layers, centre),
                      np.full(num_layers, half_width), peak)


def dataset_to_bytes(dataset):
    header = dict(dataset.manifest.to_dict())
    header['version'] = __version__
    payload = np.concatenate([dataset.thicknesses, dataset.spectra], axis=1)
    return encode_container(DATASET_MAGIC, header, payload)


def dataset_from_bytes(data):
    header, payload = decode_container(
        data, DATASET_MAGIC,
        ['num_layers', 'grid', 'materials', 'material_cycle', 'host_index',
         'seed', 'unit', 'bounds', 'count'])
    try:
        manifest = DatasetManifest.from_dict(header)
    except (TypeError, ValueError) as error:
        raise FileFormatError(f'Invalid dataset manifest: {error}')
    width = manifest.num_layers + manifest.grid.n_points
    if payload.size != manifest.count * width:
        raise FileFormatError(
            f'Payload holds {payload.size} values, manifest requires '
            f'{manifest.count * width}')
    records = payload.reshape(manifest.count, width)
    return Dataset(manifest, records[:, :manifest.num_layers],
                   records[:, manifest.num_layers:])


def save_dataset(dataset, path):
    """Write a dataset file atomically"""
    write_bytes(path, dataset_to_bytes(dataset))
    LOGGER.info('Saved %d records to %s', len(dataset), path)


def load_dataset(path):
    """
    Read a dataset file

    :raises VersionMismatchError: wrong leading version string
    :raises TruncatedFileError: file shorter than declared
    :raises ChecksumError: payload corrupted
    """
    with open(path, 'rb') as handle:
        data = handle.read()
    dataset = dataset_from_bytes(data)
    LOGGER.debug('Loaded %d records from %s', len(dataset), path)
    return dataset
