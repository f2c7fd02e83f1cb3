"""
``key: value`` configuration files for the command line tools.

Keys are option names of the subcommand, with dashes or underscores. Values
are validated and coerced with the schemas below and then used as click
defaults, so flags given on the command line still win.
"""
import logging

from voluptuous import (All, Boolean, Coerce, In, Invalid,
                        MultipleInvalid, Range, Schema)

from layered_mie_design.genetic import parse_selection_mode

LOGGER = logging.getLogger(__name__)


def _list_of(validator):
    """Accept a list or a whitespace / comma separated string"""
    def validate(value):
        if isinstance(value, str):
            value = value.replace(',', ' ').split()
        return [validator(item) for item in value]

    return validate


def _selection_mode(value):
    try:
        parse_selection_mode(value)
    except ValueError as error:
        raise Invalid(str(error))
    return value


POSITIVE_INT = All(Coerce(int), Range(min=1))
NONNEGATIVE_INT = All(Coerce(int), Range(min=0))
POSITIVE_FLOAT = All(Coerce(float), Range(min=0.0, min_included=False))
PATH = Coerce(str)

GENERATE_SCHEMA = Schema({
    'layers': POSITIVE_INT,
    'count': POSITIVE_INT,
    'seed': NONNEGATIVE_INT,
    'workers': POSITIVE_INT,
    'lambda_min': POSITIVE_FLOAT,
    'lambda_max': POSITIVE_FLOAT,
    'points': POSITIVE_INT,
    'host_index': POSITIVE_FLOAT,
    'material_file': _list_of(PATH),
    'efficiency': Boolean(),
    'out': PATH,
})

TRAIN_SCHEMA = Schema({
    'dataset': PATH,
    'arch': In(['tcnn', 'fcnn']),
    'epochs': POSITIVE_INT,
    'batch_size': POSITIVE_INT,
    'lr': POSITIVE_FLOAT,
    'm': All(Coerce(float), Range(min=0.0, max=1.0)),
    'hidden_layers': POSITIVE_INT,
    'hidden_width': POSITIVE_INT,
    'seed': NONNEGATIVE_INT,
    'out': PATH,
    'history': PATH,
    'plot': PATH,
})

COMPARE_SCHEMA = Schema({
    'layers': _list_of(POSITIVE_INT),
    'count': POSITIVE_INT,
    'epochs': POSITIVE_INT,
    'points': POSITIVE_INT,
    'seed': NONNEGATIVE_INT,
    'workers': POSITIVE_INT,
    'out': PATH,
    'plot': PATH,
})

DESIGN_SCHEMA = Schema({
    'model': PATH,
    'target_dataset': PATH,
    'target_index': NONNEGATIVE_INT,
    'target_stack': PATH,
    'target_csv': PATH,
    'ga_selection': All(str, _selection_mode),
    't_value': POSITIVE_FLOAT,
    'max_generations': POSITIVE_INT,
    'population': All(Coerce(int), Range(min=2)),
    'no_elitism': Boolean(),
    'fine_tune_steps': NONNEGATIVE_INT,
    'fine_tune_lr': POSITIVE_FLOAT,
    'seed': NONNEGATIVE_INT,
    'out': PATH,
    'overlay': PATH,
    'plot': PATH,
})

EVAL_SCHEMA = Schema({
    'model': PATH,
    'dataset': PATH,
    'split': In(['train', 'val', 'test', 'all']),
    'overlay': PATH,
    'overlay_index': NONNEGATIVE_INT,
    'plot': PATH,
})

SCHEMAS = {
    'generate': GENERATE_SCHEMA,
    'train': TRAIN_SCHEMA,
    'compare': COMPARE_SCHEMA,
    'design': DESIGN_SCHEMA,
    'eval': EVAL_SCHEMA,
}


class ConfigError(ValueError):
    """A configuration file is malformed or holds invalid values"""


def read_config_file(path):
    """
    Parse a ``key: value`` file into a dict of strings

    Blank lines and lines starting with ``#`` are skipped; dashes in keys
    become underscores.
    """
    raw = {}
    with open(path, 'r', encoding='utf-8') as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            try:
                key, value = line.split(':', maxsplit=1)
            except ValueError:
                raise ConfigError(
                    f"{path}:{lineno}: expected 'key: value', got '{line}'")
            key = key.strip().replace('-', '_')
            if key in raw:
                raise ConfigError(f'{path}:{lineno}: duplicate key {key}')
            raw[key] = value.strip()
    return raw


def validate_config(raw, command):
    """
    Validate raw values against the schema of ``command``

    :raises ConfigError: listing every invalid or unknown key
    """
    try:
        schema = SCHEMAS[command]
    except KeyError:
        raise ConfigError(f'No configuration schema for command {command}')
    try:
        return schema(raw)
    except MultipleInvalid as error:
        raise ConfigError('; '.join(
            f"{'.'.join(str(part) for part in item.path)}: {item.msg}"
            for item in error.errors))


def load_command_config(path, command):
    """Read and validate the configuration file of a subcommand"""
    config = validate_config(read_config_file(path), command)
    LOGGER.debug('Configuration for %s from %s: %s', command, path, config)
    return config
