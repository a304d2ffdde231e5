"""Little-endian section-table binary container.

One file holds named nd-arrays behind a fixed-size table, so readers in any
language can locate a section with nothing more than a magic check and a
table scan. Layout:

    bytes 0..3    magic ``GAVA``
    bytes 4..5    format version, u16
    bytes 6..7    reserved (zero)
    bytes 8..11   section count, u32
    bytes 12..15  reserved (zero)
    then          count table entries, 96 bytes each
    then          raw array bytes, each section aligned to 64 bytes

Table entry (96 bytes): name (32 bytes, NUL padded utf-8), dtype string
(8 bytes, numpy convention e.g. ``<f4``), ndim u32, reserved u32,
shape 4 x u64, absolute offset u64, byte length u64.

All multi-byte fields are little-endian; arrays are written C-contiguous.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    SectionFormatError,
    TruncatedSectionError,
    UnsupportedVersionError,
)

MAGIC = b"GAVA"
VERSION = 1

_HEADER = struct.Struct("<4sHHII")
_ENTRY = struct.Struct("<32s8sII4QQQ")
_ALIGN = 64

_ALLOWED_DTYPES = {"<f4", "<f8", "<i4", "<i8", "|u1"}


def _dtype_tag(arr: np.ndarray) -> str:
    tag = arr.dtype.str
    if tag == "|i1":
        tag = "|u1"
    if tag not in _ALLOWED_DTYPES:
        raise SectionFormatError("<write>", f"unsupported dtype {arr.dtype}")
    return tag


def write_container(path: str | Path, sections: dict[str, np.ndarray]) -> None:
    """Write named arrays to ``path``. Section order follows dict order,
    so identical inputs produce identical bytes."""
    names = list(sections)
    for name in names:
        if len(name.encode()) > 32:
            raise SectionFormatError(name, "section name longer than 32 bytes")
        if sections[name].ndim > 4:
            raise SectionFormatError(name, "more than 4 dimensions")

    table_end = _HEADER.size + _ENTRY.size * len(names)
    entries = []
    offset = table_end
    for name in names:
        arr = np.ascontiguousarray(sections[name])
        offset = (offset + _ALIGN - 1) // _ALIGN * _ALIGN
        shape = list(arr.shape) + [0] * (4 - arr.ndim)
        entries.append((name, _dtype_tag(arr), arr, offset, shape))
        offset += arr.nbytes

    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, 0, len(names), 0))
        for name, tag, arr, off, shape in entries:
            f.write(
                _ENTRY.pack(
                    name.encode(),
                    tag.encode(),
                    arr.ndim,
                    0,
                    *shape,
                    off,
                    arr.nbytes,
                )
            )
        for _, _, arr, off, _ in entries:
            f.write(b"\0" * (off - f.tell()))
            f.write(arr.tobytes())


def read_container(path: str | Path) -> dict[str, np.ndarray]:
    """Read all sections. Raises a distinct error naming the offending
    section for a bad magic, version mismatch, or truncated data."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise BadMagicError("file shorter than container header")
    magic, version, _, count, _ = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"version {version}, reader supports {VERSION}")
    table_end = _HEADER.size + _ENTRY.size * count
    if len(data) < table_end:
        raise TruncatedSectionError("<table>", "section table extends past end of file")

    out: dict[str, np.ndarray] = {}
    for i in range(count):
        raw = _ENTRY.unpack_from(data, _HEADER.size + i * _ENTRY.size)
        name = raw[0].rstrip(b"\0").decode()
        tag = raw[1].rstrip(b"\0").decode()
        ndim = raw[2]
        shape = raw[4 : 4 + 4][:ndim]
        offset, nbytes = raw[8], raw[9]
        if tag not in _ALLOWED_DTYPES:
            raise SectionFormatError(name, f"unknown dtype tag {tag!r}")
        if ndim > 4:
            raise SectionFormatError(name, f"ndim {ndim} out of range")
        dtype = np.dtype(tag)
        expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if ndim else dtype.itemsize
        if nbytes != expected:
            raise SectionFormatError(name, f"byte length {nbytes} != shape product {expected}")
        if offset + nbytes > len(data):
            raise TruncatedSectionError(name)
        arr = np.frombuffer(data, dtype=dtype, count=expected // dtype.itemsize, offset=offset)
        out[name] = arr.reshape(shape).copy()
    return out
