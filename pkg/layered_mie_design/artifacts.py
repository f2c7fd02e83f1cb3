"""
Writers for the files emitted by the command line tools

Every writer goes through :func:`atomic_write` so a failed run never leaves a
partial file behind.
"""
import io
import logging
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import pandas as pd

LOGGER = logging.getLogger(__name__)

SVG_HASH_SALT = 'layered-mie-design'


@contextmanager
def atomic_write(path, mode='wb'):
    """
    Open a temporary sibling of ``path`` for writing and move it into place
    once the block exits without error
    """
    path = Path(path)
    handle = tempfile.NamedTemporaryFile(mode=mode,
                                         dir=path.parent or '.',
                                         prefix=f'.{path.name}.',
                                         suffix='.tmp',
                                         delete=False)
    try:
        with handle:
            yield handle
        os.replace(handle.name, path)
    except BaseException:
        if os.path.exists(handle.name):
            os.unlink(handle.name)
        raise
    LOGGER.debug('Written %s', path)


def write_bytes(path, data):
    with atomic_write(path, 'wb') as handle:
        handle.write(data)


def write_text(path, text):
    write_bytes(path, text.encode('utf-8'))


def format_provenance(provenance):
    """``# key: value`` comment lines, in insertion order"""
    return ''.join(f'# {key}: {value}\n' for key, value in provenance.items())


def write_csv(path, frame, provenance=None):
    """
    Write a :class:`pandas.DataFrame` as CSV preceded by provenance comments

    :param path: destination
    :param frame: the table, written without index
    :param provenance: mapping written as ``# key: value`` lines
    """
    buffer = io.StringIO()
    buffer.write(format_provenance(provenance or {}))
    frame.to_csv(buffer, index=False)
    write_text(path, buffer.getvalue())


def read_csv(path):
    """
    Read a CSV file written by :func:`write_csv` (or any plain CSV)

    :returns: tuple ``(provenance, frame)``
    """
    provenance = {}
    with open(path, 'r', encoding='utf-8') as handle:
        for line in handle:
            if not line.startswith('#'):
                break
            try:
                key, value = line[1:].split(':', maxsplit=1)
            except ValueError:
                continue
            provenance[key.strip()] = value.strip()
    frame = pd.read_csv(path, comment='#')
    return provenance, frame


def plot_lines(path,
               x_values,
               series,
               xlabel,
               ylabel,
               title=None,
               provenance=None,
               logy=False):
    """
    Save a standalone SVG line plot

    :param x_values: shared abscissa
    :param series: mapping of legend label to ordinate values
    """
    import matplotlib
    from matplotlib.figure import Figure

    with matplotlib.rc_context({'svg.hashsalt': SVG_HASH_SALT,
                                'svg.fonttype': 'path'}):
        fig = Figure(figsize=(6.0, 4.0))
        axis = fig.add_subplot(1, 1, 1)
        for label, values in series.items():
            axis.plot(x_values, values, label=label)
        axis.set_xlabel(xlabel)
        axis.set_ylabel(ylabel)
        if logy:
            axis.set_yscale('log')
        if title:
            axis.set_title(title)
        if len(series) > 1:
            axis.legend()
        fig.tight_layout()
        buffer = io.BytesIO()
        metadata = {'Date': None}
        if provenance:
            metadata['Description'] = format_provenance(provenance)
        fig.savefig(buffer, format='svg', metadata=metadata)
    write_bytes(path, buffer.getvalue())
