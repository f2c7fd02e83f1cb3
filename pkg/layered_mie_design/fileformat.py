"""
Container format shared by dataset and model files.

Layout::

    <MAGIC>\\n
    key: <json value>\\n
    ...
    \\n
    <payload: little-endian float64>
    <CRC-32 of the payload: little-endian uint32>

The header always carries ``payload_bytes`` so truncation can be told apart
from corruption.
"""
import json
import logging
import struct
import zlib

import numpy as np

from layered_mie_design.common import (ChecksumError, FileFormatError,
                                       TruncatedFileError,
                                       VersionMismatchError)

LOGGER = logging.getLogger(__name__)

PAYLOAD_DTYPE = np.dtype('<f8')
_CRC = struct.Struct('<I')


def encode_container(magic, header, payload):
    """
    Serialise a header mapping and a float payload into bytes

    :param magic: version string written on the first line
    :param header: mapping of str keys to JSON serialisable values
    :param payload: array like of floats, flattened in C order
    """
    payload = np.ascontiguousarray(payload, dtype=PAYLOAD_DTYPE).ravel()
    raw = payload.tobytes()
    lines = [magic]
    for key, value in header.items():
        if ':' in key or '\n' in key:
            raise ValueError(f'Invalid header key: {key!r}')
        lines.append(f'{key}: {json.dumps(value, sort_keys=True)}')
    lines.append(f'payload_bytes: {len(raw)}')
    text = '\n'.join(lines) + '\n\n'
    return text.encode('utf-8') + raw + _CRC.pack(zlib.crc32(raw))


def decode_container(data, magic, required_fields=()):
    """
    Parse bytes produced by :func:`encode_container`

    :returns: tuple ``(header, payload)`` with the payload as a float64 array
    :raises VersionMismatchError: if the first line is not ``magic``
    :raises TruncatedFileError: if the header or payload is incomplete
    :raises ChecksumError: if the payload CRC does not match
    :raises FileFormatError: for malformed or missing header fields
    """
    first_end = data.find(b'\n')
    first = data[:first_end if first_end >= 0 else len(data)]
    if first != magic.encode('utf-8'):
        raise VersionMismatchError(
            f"Expected version '{magic}', found {first[:16]!r}")

    header_end = data.find(b'\n\n', first_end)
    if header_end < 0:
        raise TruncatedFileError('Header is not terminated')

    try:
        header_text = data[first_end + 1:header_end].decode('utf-8')
    except UnicodeDecodeError as error:
        raise FileFormatError(f'Header is not valid UTF-8: {error}')

    header = {}
    for line in header_text.split('\n'):
        try:
            key, value = line.split(':', maxsplit=1)
            header[key.strip()] = json.loads(value)
        except ValueError:
            raise FileFormatError(f'Malformed header line: {line!r}')

    required = ['payload_bytes'] + list(required_fields)
    missing = [field for field in required if field not in header]
    if missing:
        raise FileFormatError(f'Missing fields: {missing} in the header')

    nbytes = header.pop('payload_bytes')
    if not isinstance(nbytes, int) or nbytes < 0 \
            or nbytes % PAYLOAD_DTYPE.itemsize:
        raise FileFormatError(f'Invalid payload_bytes: {nbytes}')

    body = data[header_end + 2:]
    if len(body) < nbytes + _CRC.size:
        raise TruncatedFileError(
            f'Expected {nbytes + _CRC.size} bytes after the header, '
            f'found {len(body)}')
    if len(body) > nbytes + _CRC.size:
        raise FileFormatError(
            f'{len(body) - nbytes - _CRC.size} unexpected trailing bytes')

    raw = body[:nbytes]
    (stored, ) = _CRC.unpack(body[nbytes:])
    if zlib.crc32(raw) != stored:
        raise ChecksumError('Payload checksum does not match')
    payload = np.frombuffer(raw, dtype=PAYLOAD_DTYPE).copy()
    LOGGER.debug('Decoded %s container with %d payload values', magic,
                 payload.size)
    return header, payload
