"""
Module for common stuff like global variables and exceptions
"""

DESIGN_BOX = (30.0, 70.0)  # admissible shell thickness in nm
GENE_ALPHABET = (35.0, 45.0, 55.0, 65.0)  # quantised thicknesses used by the GA
DEFAULT_MATERIAL_CYCLE = ("SiO2", "TiO2")  # core first
DEFAULT_HOST_INDEX = 1.0
DEFAULT_GRID = (400.0, 800.0, 400)  # lambda_min, lambda_max, n_points

DATASET_MAGIC = "NLD1"
MODEL_MAGIC = "NLM1"


class LayeredMieError(Exception):
    """Base class of all errors raised by this package"""


class MaterialDomainError(LayeredMieError, ValueError):
    """A wavelength was requested outside the range of a material table"""
    def __init__(self, material, wavelength, domain):
        self.material = material
        self.wavelength = wavelength
        self.domain = domain
        super().__init__(
            f"Wavelength {wavelength} nm is outside the table of material "
            f"'{material}' which covers [{domain[0]}, {domain[1]}] nm")


class OracleError(LayeredMieError):
    """A scattering solver could not produce a reliable result"""
    def __init__(self, message, layer=None, order=None):
        self.layer = layer
        self.order = order
        super().__init__(f"{message} (layer: {layer}, order: {order})")


class DatasetGenerationError(LayeredMieError):
    """Generation of a single record failed"""
    def __init__(self, record_index, cause):
        self.record_index = record_index
        self.cause = cause
        super().__init__(
            f"Generation of record {record_index} failed: {cause}")


class NormalizationError(LayeredMieError):
    """Normalisation statistics cannot be defined"""


class FileFormatError(LayeredMieError):
    """A dataset or model file cannot be read"""


class VersionMismatchError(FileFormatError):
    """The file does not start with the expected version string"""


class TruncatedFileError(FileFormatError):
    """The file is shorter than its header declares"""


class ChecksumError(FileFormatError):
    """The CRC-32 of the payload does not match the stored value"""


class NumericError(LayeredMieError):
    """Non-finite activations or gradients"""
    def __init__(self, message, layer=None):
        self.layer = layer
        super().__init__(f"{message} (layer: {layer})")


class TrainingError(LayeredMieError):
    """Training diverged"""
    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"Training diverged at epoch {epoch}: loss {loss}")
