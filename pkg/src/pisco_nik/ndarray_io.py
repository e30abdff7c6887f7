"""Reader and writer for the ``NDA1`` binary array format.

Layout (all little-endian)::

    b"NDA1"  u8 dtype code  u8 ndim  2 zero bytes  ndim x u64 dims  payload

Dtype codes: 1 float32, 2 float64, 3 complex64, 4 complex128.  The payload
is row-major with complex values interleaved as (real, imag).
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import BadMagic, TruncatedPayload, UnknownDtype

MAGIC = b"NDA1"

DTYPES = {
    1: np.dtype("<f4"),
    2: np.dtype("<f8"),
    3: np.dtype("<c8"),
    4: np.dtype("<c16"),
}
CODES = {dt.newbyteorder("="): code for code, dt in DTYPES.items()}


def encode_nda(array) -> bytes:
    a = np.asarray(array)
    code = CODES.get(a.dtype.newbyteorder("="))
    if code is None:
        raise UnknownDtype(f"cannot store dtype {a.dtype}; use float32/64 or complex64/128")
    if a.ndim > 255:
        raise ValueError("too many dimensions")
    header = MAGIC + struct.pack("<BB2x", code, a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    return header + np.ascontiguousarray(a, dtype=DTYPES[code]).tobytes()


def decode_nda(buf: bytes) -> np.ndarray:
    if len(buf) < 8 or buf[:4] != MAGIC:
        raise BadMagic("not an NDA1 file")
    code, ndim = struct.unpack_from("<BB", buf, 4)
    if code not in DTYPES:
        raise UnknownDtype(f"unknown dtype code {code}")
    off = 8 + 8 * ndim
    if len(buf) < off:
        raise TruncatedPayload("header ends early")
    dims = struct.unpack_from(f"<{ndim}Q", buf, 8)
    dt = DTYPES[code]
    need = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
    if len(buf) - off != need:
        raise TruncatedPayload(f"payload is {len(buf) - off} bytes, expected {need}")
    return np.frombuffer(buf, dtype=dt, offset=off).reshape(dims).astype(dt.newbyteorder("="))


def write_nda(path: str | os.PathLike, array) -> None:
    data = encode_nda(array)
    with open(path, "wb") as fh:
        fh.write(data)


def read_nda(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_nda(fh.read())
