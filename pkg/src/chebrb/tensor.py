"""Dense n-dimensional array operators used by every evaluation path.

Arrays are plain C-ordered ``float64`` numpy arrays (last axis fastest).
Two contraction forms are provided:

* :func:`tensor_contract` contracts the *leading* axis of ``a`` with the
  rows of a matrix and appends the new axis last. Folding it over all axes
  evaluates a tensor-product series on a product grid.
* :func:`tensor_contract_batched` contracts one axis while carrying a block
  of leading batch axes along, which is what the hierarchical (reduced)
  evaluation needs.

Singleton axes are legal everywhere; extents are never collapsed.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError


def as_ndarray(a) -> np.ndarray:
    """Return ``a`` as a C-contiguous float64 array with at least one axis."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if 0 in arr.shape:
        raise DimensionError(f"all extents must be >= 1, got {arr.shape}")
    return arr


def permute_cycle(a) -> np.ndarray:
    """Move the leading axis to the end: ``D[j1, ..., jm, i] = a[i, j1, ..., jm]``."""
    a = as_ndarray(a)
    if a.ndim < 2:
        raise DimensionError(f"permute_cycle needs >= 2 axes, got {a.ndim}")
    return np.ascontiguousarray(np.moveaxis(a, 0, -1))


def tensor_contract(a, b) -> np.ndarray:
    """Contract the leading axis of ``a`` against ``b`` and append the result axis.

    Parameters
    ----------
    a : array_like, shape (s, n1, ..., nk)
    b : array_like, shape (s, t)

    Returns
    -------
    ndarray, shape (n1, ..., nk, t)
        ``C[j1, ..., jk, :] = b.T @ a[:, j1, ..., jk]``.
    """
    a = as_ndarray(a)
    b = np.asarray(b, dtype=np.float64)
    if b.ndim == 1:
        b = b.reshape(-1, 1)
    if b.ndim != 2:
        raise DimensionError(f"b must be a matrix, got shape {b.shape}")
    s = a.shape[0]
    if b.shape[0] != s:
        raise DimensionError(
            f"leading extent mismatch: a has {s}, b has {b.shape[0]}")
    rest = a.shape[1:]
    # (s, R).T @ (s, t) -> (R, t): one GEMM, result already row-major in (rest, t)
    out = a.reshape(s, -1).T @ b
    return np.ascontiguousarray(out.reshape(*rest, b.shape[1]))


def tensor_contract_batched(a, b) -> np.ndarray:
    """Batched contraction carrying shared leading axes.

    ``a`` has shape ``(m1, ..., m_{k-1}, m_k, t)`` and ``b`` has shape
    ``(m1, ..., m_{k-1}, m_k, b1, ..., bs)``. The result has shape
    ``(m1, ..., m_{k-1}, t, b1, ..., bs)`` with, for every batch index,
    ``C[..., :, rest] = a[..., :, :].T @ b[..., :, rest]``.
    """
    a = as_ndarray(a)
    b = as_ndarray(b)
    if a.ndim < 2:
        raise DimensionError(f"a needs >= 2 axes, got shape {a.shape}")
    k = a.ndim - 1
    if b.ndim < k or b.shape[:k] != a.shape[:k]:
        raise DimensionError(
            f"shared axes mismatch: a {a.shape} vs b {b.shape}")
    batch = a.shape[:k - 1]
    mk, t = a.shape[k - 1], a.shape[k]
    tail = b.shape[k:]
    nb = int(np.prod(batch, dtype=np.int64))
    a3 = a.reshape(nb, mk, t)
    b3 = b.reshape(nb, mk, -1)
    out = np.matmul(a3.transpose(0, 2, 1), b3)
    return np.ascontiguousarray(out.reshape(*batch, t, *tail))
