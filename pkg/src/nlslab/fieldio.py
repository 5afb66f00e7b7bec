"""Binary field dumps ("NLS1") and CSV export of fields on a grid.

Layout (little endian): magic b"NLS1", version u32, N u32, L f64,
n_components u32, complex_flag u8, then for each component its real part
as N f64 values followed, for complex fields, by its imaginary part.
"""
from __future__ import annotations

import csv
import struct

import numpy as np

from .grid import ComplexPair, RealPair, make_grid

MAGIC = b"NLS1"
VERSION = 1
_HEADER = struct.Struct("<4sIIdIB")


class FieldFormatError(ValueError):
    pass


def dumps(F) -> bytes:
    g = F.grid
    is_complex = isinstance(F, ComplexPair)
    parts = [_HEADER.pack(MAGIC, VERSION, g.N, g.L, 2, int(is_complex))]
    for c in F.components:
        parts.append(np.ascontiguousarray(c.real, dtype="<f8").tobytes())
        if is_complex:
            parts.append(np.ascontiguousarray(c.imag, dtype="<f8").tobytes())
    return b"".join(parts)


def loads(buf: bytes):
    if len(buf) < _HEADER.size:
        raise FieldFormatError("truncated header")
    magic, version, N, L, ncomp, cflag = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FieldFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FieldFormatError(f"unsupported version {version}")
    if ncomp != 2 or cflag not in (0, 1):
        raise FieldFormatError(f"unsupported layout ({ncomp} components, complex={cflag})")
    per = N * (1 + cflag)
    data = np.frombuffer(buf, dtype="<f8", offset=_HEADER.size)
    if data.size != per * ncomp:
        raise FieldFormatError(f"expected {per * ncomp} values, found {data.size}")
    g = make_grid(L, N)
    comps = data.reshape(ncomp, 1 + cflag, N)
    if cflag:
        return ComplexPair(g, comps[0, 0] + 1j * comps[0, 1], comps[1, 0] + 1j * comps[1, 1])
    return RealPair(g, comps[0, 0].copy(), comps[1, 0].copy())


def write_field(path, F):
    with open(path, "wb") as fh:
        fh.write(dumps(F))


def read_field(path):
    with open(path, "rb") as fh:
        return loads(fh.read())


def write_csv(path, F, header_lines=()):
    g = F.grid
    if isinstance(F, ComplexPair):
        names = ["x", "re1", "im1", "re2", "im2"]
        cols = [g.x, F.phi1.real, F.phi1.imag, F.phi2.real, F.phi2.imag]
    else:
        names = ["x", "u1", "u2"]
        cols = [g.x, F.u1, F.u2]
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
