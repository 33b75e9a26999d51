"""Tensor-product Chebyshev interpolants over box domains.

An :class:`Interpolant` stores the coefficient tensor of
``sum_l c_l T_{l1}(x1) ... T_{ln}(xn)`` in reference coordinates together
with the box it was built on. Evaluation on a product grid folds the
tensor against one Chebyshev matrix per axis (see
:func:`chebrb.tensor.tensor_contract`), which touches every coefficient
once regardless of the number of grid points.

Large tensors can be held in *split* form: one coefficient tensor over the
remaining variables per Chebyshev node of a chosen axis.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .chebyshev import _coeffs_leading_axis, cheb_poly_values, coeffs_nd, nodes
from .errors import DimensionError, DomainError, OracleError
from .tensor import as_ndarray, tensor_contract

log = logging.getLogger(__name__)

_SLACK = 1e-12


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``prod_j [lower_j, upper_j]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64).reshape(-1)
        hi = np.asarray(self.upper, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise DimensionError("lower and upper must be non-empty and the same length")
        if not np.all(lo < hi):
            j = int(np.argmin(hi - lo))
            raise DomainError(f"dimension {j}: need min < max, got [{lo[j]}, {hi[j]}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_bounds(cls, bounds) -> "Domain":
        b = np.asarray(bounds, dtype=np.float64).reshape(-1, 2)
        return cls(b[:, 0], b[:, 1])

    @property
    def ndim(self) -> int:
        return self.lower.size

    @property
    def bounds(self):
        return list(zip(self.lower.tolist(), self.upper.tolist()))

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.upper + self.lower)

    def to_reference_1d(self, dim: int, values) -> np.ndarray:
        v = np.asarray(values, dtype=np.float64)
        lo, hi = self.lower[dim], self.upper[dim]
        slack = _SLACK * max(1.0, abs(lo), abs(hi))
        bad = (v < lo - slack) | (v > hi + slack) | ~np.isfinite(v)
        if np.any(bad):
            raise DomainError(
                f"dimension {dim}: value {float(v[bad].flat[0])!r} outside [{lo}, {hi}]")
        x = (v - self.center[dim]) / self.half_width[dim]
        return np.clip(x, -1.0, 1.0)

    def to_reference(self, points) -> np.ndarray:
        """Map points (``(..., n)``) from the box onto ``[-1, 1]^n``."""
        p = np.asarray(points, dtype=np.float64)
        if p.shape[-1:] != (self.ndim,):
            raise DimensionError(f"expected trailing dimension {self.ndim}, got shape {p.shape}")
        return np.stack([self.to_reference_1d(j, p[..., j]) for j in range(self.ndim)], axis=-1)

    def from_reference(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self.half_width * x + self.center


def to_reference(domain: Domain, point) -> np.ndarray:
    return domain.to_reference(point)


@dataclass(frozen=True)
class ProductGrid:
    """Per-dimension value lists; the grid is their Cartesian product."""

    values: tuple

    def __post_init__(self):
        vals = tuple(np.asarray(v, dtype=np.float64).reshape(-1) for v in self.values)
        if not vals or any(v.size == 0 for v in vals):
            raise DimensionError("every dimension needs at least one value")
        object.__setattr__(self, "values", vals)

    @property
    def ndim(self) -> int:
        return len(self.values)

    @property
    def shape(self) -> tuple:
        return tuple(v.size for v in self.values)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def points(self) -> np.ndarray:
        """All grid points as an ``(size, n)`` array in row-major grid order."""
        mesh = np.meshgrid(*self.values, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def node_grid(domain: Domain, degrees) -> ProductGrid:
    """Product grid of the Chebyshev nodes of every dimension."""
    return ProductGrid(tuple(nodes(int(N), a, b).nodes
                             for N, (a, b) in zip(degrees, domain.bounds)))


def control_grid(domain: Domain, m: int) -> ProductGrid:
    """Interior uniform grid ``lower + i (upper - lower) / m`` for ``i = 1..m-1``."""
    if m < 2:
        raise DomainError("control grid needs m >= 2")
    i = np.arange(1, m)
    return ProductGrid(tuple(lo + (hi - lo) * i / m for lo, hi in domain.bounds))


def _chebyshev_matrices(domain: Domain, degrees, grid: ProductGrid):
    if grid.ndim != domain.ndim:
        raise DimensionError(
            f"grid has {grid.ndim} dimensions, polynomial has {domain.ndim}")
    return [cheb_poly_values(int(N), domain.to_reference_1d(j, v))
            for j, (N, v) in enumerate(zip(degrees, grid.values))]


def eval_coeffs_grid(coeffs: np.ndarray, tmats) -> np.ndarray:
    """Fold a coefficient tensor against one ``(N_j+1, q_j)`` matrix per axis."""
    out = coeffs
    for t in tmats:
        out = tensor_contract(out, t)
    return out


def eval_coeffs_points(coeffs: np.ndarray, x_ref: np.ndarray) -> np.ndarray:
    """Evaluate a coefficient tensor at scattered reference points ``(m, n)``."""
    n = coeffs.ndim
    tmats = [cheb_poly_values(coeffs.shape[j] - 1, x_ref[:, j]) for j in range(n)]
    out = tensor_contract(coeffs, tmats[0])  # (N2+1, ..., Nn+1, m)
    for j in range(1, n):
        # contract the leading axis point-by-point with column m of T_j
        s = out.shape
        out = np.einsum("am,abm->bm", tmats[j], out.reshape(s[0], -1, s[-1]))
        out = out.reshape(*s[1:])
    return out


@dataclass(frozen=True)
class SplitForm:
    """Coefficient tensors of ``P`` restricted to each node of ``axis``.

    ``slices[k]`` covers the remaining variables at reference node
    ``cos(pi k / N_axis)``. Slices may be memory-mapped; they are read one
    at a time during evaluation.
    """

    axis: int
    slices: tuple


@dataclass(frozen=True)
class Interpolant:
    """Chebyshev interpolant on a box, either full or split along one axis."""

    domain: Domain
    coeffs: Optional[np.ndarray] = None
    split: Optional[SplitForm] = None
    _degrees: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if (self.coeffs is None) == (self.split is None):
            raise ValueError("exactly one of coeffs or split must be given")
        if self.coeffs is not None:
            c = as_ndarray(self.coeffs)
            if c.ndim != self.domain.ndim:
                raise DimensionError(
                    f"coefficient tensor has {c.ndim} axes, domain has {self.domain.ndim}")
            if min(c.shape) < 2:
                raise DimensionError(f"every extent must be >= 2, got {c.shape}")
            object.__setattr__(self, "coeffs", c)
            degrees = tuple(s - 1 for s in c.shape)
        else:
            ax = self.split.axis
            first = self.split.slices[0]
            rest = [s - 1 for s in first.shape]
            if len(rest) != self.domain.ndim - 1:
                raise DimensionError("slice dimensionality does not match the domain")
            for sl in self.split.slices:
                if tuple(sl.shape) != tuple(first.shape):
                    raise DimensionError("all slices must share one shape")
            degrees = tuple(rest[:ax] + [len(self.split.slices) - 1] + rest[ax:])
            if min(degrees) < 1:
                raise DimensionError("every degree must be >= 1")
        object.__setattr__(self, "_degrees", degrees)

    @property
    def degrees(self) -> tuple:
        return self._degrees

    @property
    def ndim(self) -> int:
        return self.domain.ndim

    @property
    def is_split(self) -> bool:
        return self.split is not None

    @property
    def nbytes(self) -> int:
        return 8 * int(np.prod([N + 1 for N in self.degrees]))

    def eval_grid(self, grid: ProductGrid) -> np.ndarray:
        tmats = _chebyshev_matrices(self.domain, self.degrees, grid)
        if self.split is None:
            return eval_coeffs_grid(self.coeffs, tmats)
        ax = self.split.axis
        rest = tmats[:ax] + tmats[ax + 1:]
        rest_shape = tuple(t.shape[1] for t in rest)
        nodal = np.empty((len(self.split.slices),) + rest_shape)
        for k, sl in enumerate(self.split.slices):
            nodal[k] = eval_coeffs_grid(np.asarray(sl, dtype=np.float64), rest)
        along = tensor_contract(_coeffs_leading_axis(nodal), tmats[ax])
        return np.ascontiguousarray(np.moveaxis(along, -1, ax))

    def eval_reference_points(self, x_ref) -> np.ndarray:
        x_ref = np.atleast_2d(np.asarray(x_ref, dtype=np.float64))
        if self.split is None:
            return eval_coeffs_points(self.coeffs, x_ref)
        ax = self.split.axis
        rest = np.delete(x_ref, ax, axis=1)
        nodal = np.stack([eval_coeffs_points(np.asarray(sl, dtype=np.float64), rest)
                          for sl in self.split.slices])
        c = _coeffs_leading_axis(nodal)
        t = cheb_poly_values(c.shape[0] - 1, x_ref[:, ax])
        return np.einsum("lm,lm->m", c, t)

    def eval_points(self, points) -> np.ndarray:
        """Evaluate at scattered points given as an ``(m, n)`` array."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return self.eval_reference_points(self.domain.to_reference(pts))

    def eval_point(self, point) -> float:
        p = np.asarray(point, dtype=np.float64).reshape(-1)
        if p.size != self.ndim:
            raise DimensionError(f"expected {self.ndim} coordinates, got {p.size}")
        grid = ProductGrid(tuple(p[:, None]))
        return float(self.eval_grid(grid).reshape(-1)[0])

    __call__ = eval_point

    def full_coeffs(self) -> np.ndarray:
        """Coefficient tensor, reassembling it from the slices if split."""
        if self.split is None:
            return self.coeffs
        ax = self.split.axis
        nodal = np.stack([np.asarray(sl, dtype=np.float64) for sl in self.split.slices])
        return np.ascontiguousarray(np.moveaxis(_coeffs_leading_axis(nodal), 0, ax))

    def partial(self, fixed: dict) -> "Interpolant":
        """Fix some dimensions to values and return the interpolant in the rest.

        ``fixed`` maps dimension index to a value in original coordinates.
        """
        keep = [j for j in range(self.ndim) if j not in fixed]
        if not keep:
            raise DimensionError("at least one dimension must stay free")
        c = self.full_coeffs()
        # contract fixed axes from the last one down so indices stay valid
        for j in sorted(fixed, reverse=True):
            x = self.domain.to_reference_1d(j, [fixed[j]])
            t = cheb_poly_values(c.shape[j] - 1, x)[:, 0]
            c = np.tensordot(c, t, axes=([j], [0]))
        dom = Domain(self.domain.lower[keep], self.domain.upper[keep])
        return Interpolant(dom, np.ascontiguousarray(c))


def build(oracle: Callable, domain: Domain, degrees: Sequence[int], *,
          vectorized: bool = False, threads: int = 1,
          split_axis: Optional[int] = None) -> Interpolant:
    """Interpolate ``oracle`` at the tensor Chebyshev nodes of ``domain``.

    Parameters
    ----------
    oracle : callable
        Maps an ``n``-vector in original coordinates to a float. With
        ``vectorized=True`` it instead receives an ``(m, n)`` array and
        returns ``m`` values.
    degrees : sequence of int
        Polynomial degree ``N_j >= 1`` per dimension (``N_j + 1`` nodes).
    threads : int
        Worker threads for scalar oracles. Results are assembled in node
        order, so the output does not depend on scheduling.
    split_axis : int, optional
        Build the split form directly, one slice per node of this axis,
        without ever holding the full tensor.
    """
    degrees = [int(N) for N in degrees]
    if len(degrees) != domain.ndim:
        raise DimensionError(f"{len(degrees)} degrees for a {domain.ndim}-d domain")
    if min(degrees) < 1:
        raise DomainError(f"every degree must be >= 1, got {degrees}")
    axes = [nodes(N, a, b).nodes for N, (a, b) in zip(degrees, domain.bounds)]

    def values_on(node_axes):
        grid = ProductGrid(tuple(node_axes))
        pts = grid.points()
        return _call_oracle(oracle, pts, vectorized, threads).reshape(grid.shape)

    if split_axis is None:
        return Interpolant(domain, coeffs_nd(values_on(axes)))
    if not 0 <= split_axis < domain.ndim or domain.ndim < 2:
        raise DimensionError(f"invalid split axis {split_axis} for {domain.ndim} dimensions")
    slices = []
    for k, node in enumerate(axes[split_axis]):
        sub = list(axes)
        sub[split_axis] = np.array([node])
        vals = values_on(sub)
        slices.append(coeffs_nd(np.squeeze(vals, axis=split_axis)))
        log.debug("built slice %d/%d", k + 1, len(axes[split_axis]))
    return Interpolant(domain, split=SplitForm(split_axis, tuple(slices)))


def _call_oracle(oracle, pts, vectorized, threads):
    if vectorized:
        try:
            vals = np.asarray(oracle(pts), dtype=np.float64).reshape(-1)
        except Exception as exc:
            raise OracleError(f"vectorized oracle failed: {exc}") from exc
        if vals.size != len(pts):
            raise OracleError(f"oracle returned {vals.size} values for {len(pts)} nodes")
        bad = ~np.isfinite(vals)
        if np.any(bad):
            node = pts[np.argmax(bad)]
            raise OracleError(f"oracle returned a non-finite value at node {node.tolist()}", node)
        return vals

    def one(p):
        try:
            v = float(oracle(p))
        except Exception as exc:
            raise OracleError(f"oracle failed at node {p.tolist()}: {exc}", p) from exc
        if not np.isfinite(v):
            raise OracleError(f"oracle returned {v} at node {p.tolist()}", p)
        return v

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.fromiter(pool.map(one, pts), dtype=np.float64, count=len(pts))
    return np.fromiter((one(p) for p in pts), dtype=np.float64, count=len(pts))


def eval_grid(p, grid: ProductGrid) -> np.ndarray:
    """Evaluate an interpolant (or reduced polynomial) on a product grid."""
    return p.eval_grid(grid)


def eval_point(p, point) -> float:
    return p.eval_point(point)


def fd_partial(p, point, dim: int, h: float = 1e-6) -> float:
    """Forward-difference partial derivative in original coordinates.

    The step ``h`` is taken in reference coordinates and the result is
    scaled by ``2 / (b - a)``. When ``x + h`` leaves ``[-1, 1]`` a backward
    step is used instead.
    """
    if not 0 < h < 1:
        raise DomainError(f"need 0 < h < 1, got {h}")
    dom = p.domain
    x = dom.to_reference(np.asarray(point, dtype=np.float64).reshape(-1))
    step = h if x[dim] + h <= 1.0 else -h
    xh = x.copy()
    xh[dim] += step
    f0, f1 = p.eval_reference_points(np.stack([x, xh]))
    return float((f1 - f0) / step / dom.half_width[dim])


def split(p: Interpolant, axis: int) -> Interpolant:
    """Convert to split form: one slice tensor per Chebyshev node of ``axis``."""
    if not 0 <= axis < p.ndim or p.ndim < 2:
        raise DimensionError(f"invalid split axis {axis} for {p.ndim} dimensions")
    c = p.full_coeffs()
    N = c.shape[axis] - 1
    t = cheb_poly_values(N, nodes(N).nodes)  # t[l, k] = T_l(alpha_k)
    moved = np.moveaxis(c, axis, 0)
    slices = tuple(np.ascontiguousarray(np.tensordot(t[:, k], moved, axes=(0, 0)))
                   for k in range(N + 1))
    return Interpolant(p.domain, split=SplitForm(axis, slices))


def mse_on_grid(p, reference_values, grid: ProductGrid) -> float:
    """Mean squared difference between ``p`` on ``grid`` and reference values."""
    ref = np.asarray(reference_values, dtype=np.float64)
    if ref.shape != grid.shape:
        raise DimensionError(f"reference shape {ref.shape} != grid shape {grid.shape}")
    diff = p.eval_grid(grid) - ref
    return float(np.mean(diff * diff))

