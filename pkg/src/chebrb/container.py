"""Binary container for full, reduced and split polynomials.

Layout (all little-endian)::

    b"CHRB"  u32 version=1  u8 kind  u8 n
    n x (u32 N_j, f64 min_j, f64 max_j)
    kind 1 only: (n-1) x u32 M_j
    payload, f64 row-major:
        kind 0: the coefficient tensor
        kind 1: level arrays A1 .. An in level order
        kind 2: u8 axis, then N_axis+1 slice tensors

There is no padding. Every array shape follows from the header, so a
reader can seek straight to any slice; :func:`read` memory-maps split
payloads and evaluation touches one slice at a time.
"""

from __future__ import annotations

import io
import os
import struct
from typing import Union

import numpy as np

from .interpolant import Domain, Interpolant, SplitForm
from .reduced_basis import ReducedPolynomial

MAGIC = b"CHRB"
VERSION = 1
KIND_FULL, KIND_REDUCED, KIND_SPLIT = 0, 1, 2

_HEAD = struct.Struct("<4sIBB")
_DIM = struct.Struct("<Idd")
_F8 = np.dtype("<f8")


class ContainerError(ValueError):
    """Malformed or unsupported container file."""


def kind_of(poly) -> int:
    if isinstance(poly, ReducedPolynomial):
        return KIND_REDUCED
    if isinstance(poly, Interpolant):
        return KIND_SPLIT if poly.is_split else KIND_FULL
    raise TypeError(f"cannot serialize {type(poly).__name__}")


def _arrays(poly, kind):
    if kind == KIND_FULL:
        return [poly.coeffs]
    if kind == KIND_REDUCED:
        return list(poly.levels)
    return list(poly.split.slices)


def _header(poly, kind) -> bytes:
    dom = poly.domain
    if dom.ndim > 255:
        raise ContainerError("at most 255 dimensions")
    out = [_HEAD.pack(MAGIC, VERSION, kind, dom.ndim)]
    for N, lo, hi in zip(poly.degrees, dom.lower, dom.upper):
        out.append(_DIM.pack(int(N), float(lo), float(hi)))
    if kind == KIND_REDUCED:
        out.append(struct.pack(f"<{dom.ndim - 1}I", *poly.retained))
    if kind == KIND_SPLIT:
        out.append(struct.pack("<B", poly.split.axis))
    return b"".join(out)


def write(poly, fh) -> int:
    """Write ``poly`` to a binary file object; returns bytes written."""
    kind = kind_of(poly)
    head = _header(poly, kind)
    fh.write(head)
    total = len(head)
    for a in _arrays(poly, kind):
        # slices may be memmaps; astype keeps one slice in memory at a time
        buf = np.ascontiguousarray(a, dtype=_F8).tobytes()
        fh.write(buf)
        total += len(buf)
    return total


def save(poly, path: Union[str, os.PathLike]) -> int:
    with open(path, "wb") as fh:
        return write(poly, fh)


def dumps(poly) -> bytes:
    buf = io.BytesIO()
    write(poly, buf)
    return buf.getvalue()


def _parse_header(raw: bytes):
    if len(raw) < _HEAD.size:
        raise ContainerError("file too short for a header")
    magic, version, kind, n = _HEAD.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ContainerError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ContainerError(f"unsupported version {version}")
    if kind not in (KIND_FULL, KIND_REDUCED, KIND_SPLIT):
        raise ContainerError(f"unknown kind {kind}")
    if n < 1:
        raise ContainerError("n must be >= 1")
    off = _HEAD.size
    if len(raw) < off + n * _DIM.size:
        raise ContainerError("truncated dimension table")
    degrees, lower, upper = [], [], []
    for _ in range(n):
        N, lo, hi = _DIM.unpack_from(raw, off)
        off += _DIM.size
        degrees.append(N)
        lower.append(lo)
        upper.append(hi)
    extra = None
    if kind == KIND_REDUCED:
        if n < 2:
            raise ContainerError("reduced form needs n >= 2")
        extra = list(struct.unpack_from(f"<{n - 1}I", raw, off))
        off += 4 * (n - 1)
    elif kind == KIND_SPLIT:
        (extra,) = struct.unpack_from("<B", raw, off)
        off += 1
        if extra >= n or n < 2:
            raise ContainerError(f"split axis {extra} invalid for n={n}")
    dom = Domain(np.array(lower), np.array(upper))
    return kind, degrees, dom, extra, off


def _shapes(kind, degrees, extra):
    ext = [N + 1 for N in degrees]
    if kind == KIND_FULL:
        return [tuple(ext)]
    if kind == KIND_REDUCED:
        ms = [M + 1 for M in extra]
        shapes = [tuple(ms[:j + 1]) + (ext[j],) for j in range(len(ext) - 1)]
        shapes.append(tuple(ms) + (ext[-1],))
        return shapes
    rest = tuple(ext[:extra] + ext[extra + 1:])
    return [rest] * ext[extra]


def _assemble(kind, dom, extra, arrays):
    if kind == KIND_FULL:
        return Interpolant(dom, arrays[0])
    if kind == KIND_REDUCED:
        return ReducedPolynomial(dom, tuple(arrays))
    return Interpolant(dom, split=SplitForm(extra, tuple(arrays)))


def loads(raw: bytes):
    kind, degrees, dom, extra, off = _parse_header(raw)
    arrays = []
    for shape in _shapes(kind, degrees, extra):
        count = int(np.prod(shape))
        if len(raw) < off + 8 * count:
            raise ContainerError("truncated payload")
        arrays.append(np.frombuffer(raw, _F8, count, off).reshape(shape).astype(np.float64))
        off += 8 * count
    if off != len(raw):
        raise ContainerError(f"{len(raw) - off} trailing bytes")
    return _assemble(kind, dom, extra, arrays)


def read(path: Union[str, os.PathLike], mmap: bool = True):
    """Read a container file.

    With ``mmap`` (default) split slices stay on disk as read-only memory
    maps; full and reduced payloads are always loaded.
    """
    size = os.path.getsize(path)
    with open(path, "rb") as fh:
        # the header is tiny; 64 KiB covers n = 255 with room to spare
        head = fh.read(min(size, 65536))
    kind, degrees, dom, extra, off = _parse_header(head)
    shapes = _shapes(kind, degrees, extra)
    need = off + 8 * sum(int(np.prod(s)) for s in shapes)
    if need != size:
        raise ContainerError(f"payload size mismatch: expected {need} bytes, file has {size}")
    if kind != KIND_SPLIT or not mmap:
        with open(path, "rb") as fh:
            return loads(fh.read())
    arrays = []
    for shape in shapes:
        arrays.append(np.memmap(path, dtype=_F8, mode="r", offset=off, shape=shape))
        off += 8 * int(np.prod(shape))
    return _assemble(kind, dom, extra, arrays)


def expected_size(kind: int, degrees, retained=None) -> int:
    """Byte size of a container with the given layout, header included."""
    n = len(degrees)
    head = _HEAD.size + n * _DIM.size
    extra = retained if kind == KIND_REDUCED else (0 if kind == KIND_SPLIT else None)
    if kind == KIND_REDUCED:
        head += 4 * (n - 1)
    elif kind == KIND_SPLIT:
        head += 1
    return head + 8 * sum(int(np.prod(s)) for s in _shapes(kind, list(degrees), extra))
