"""Hierarchical orthonormalization of a Chebyshev interpolant.

The full coefficient tensor of ``P(x1, ..., xn)`` is rewritten as

    sum_{i1..i_{n-1}} A1[i1](x1) A2[i1,i2](x2) ... A{n-1}[i1..i_{n-1}](x_{n-1})
                      q[i1..i_{n-1}](xn)

by splitting off one variable at a time. At each level the restrictions of
the current branch polynomial to the Chebyshev nodes of the split variable
are Gram-Schmidt orthonormalized in the weighted L2 norm, greedily taking
the candidate that explains most of the remaining residual. Keeping only
the first ``M_j + 1`` functions per level (shared across branches) gives a
reduced polynomial whose storage no longer grows like ``prod (N_j + 1)``.

All inner products are evaluated exactly on Chebyshev coefficients.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chebyshev import _coeffs_leading_axis, cheb_poly_values, chebyshev_weights, reference_nodes
from .errors import DimensionError, ToleranceError
from .interpolant import Domain, Interpolant, ProductGrid
from .tensor import tensor_contract_batched

log = logging.getLogger(__name__)

DEGENERATE_RTOL = 1e-14


# --------------------------------------------------------------------------
# samplers: evaluate pieces of the hierarchy on a product grid or point set


class _GridSampler:
    """Evaluation on a product grid; one ``(N_j+1, q_j)`` matrix per axis."""

    def __init__(self, tmats):
        self.tmats = [np.asarray(t, dtype=np.float64) for t in tmats]

    def series(self, d, coeffs):
        return coeffs @ self.tmats[d]

    def tensor(self, d0, coeffs):
        nb = coeffs.ndim - (len(self.tmats) - d0)
        out = coeffs
        for d in range(d0, len(self.tmats)):
            out = np.tensordot(out, self.tmats[d], axes=([nb], [0]))
        return out

    def combine(self, left, right):
        return tensor_contract_batched(left, right)


class _PointSampler:
    """Evaluation at scattered reference points ``(m, n)``."""

    def __init__(self, x_ref, degrees):
        self.tmats = [cheb_poly_values(int(N), x_ref[:, j]) for j, N in enumerate(degrees)]

    def series(self, d, coeffs):
        return coeffs @ self.tmats[d]

    def tensor(self, d0, coeffs):
        nb = coeffs.ndim - (len(self.tmats) - d0)
        out = np.tensordot(coeffs, self.tmats[d0], axes=([nb], [0]))
        for d in range(d0 + 1, len(self.tmats)):
            out = np.einsum("...am,am->...m", np.moveaxis(out, nb, -2), self.tmats[d])
        return out

    def combine(self, left, right):
        return np.einsum("...km,...km->...m", left, right)


def _fold(sampler, levels):
    """Right-to-left nested contraction of the level arrays."""
    n = len(levels)
    acc = sampler.series(n - 1, levels[-1])
    for j in range(n - 2, -1, -1):
        acc = sampler.combine(sampler.series(j, levels[j]), acc)
    return acc


# --------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class TruncationSpec:
    """MSE budget ``epsilon`` enforced on a point set.

    ``points`` is ``None`` (the Chebyshev nodes of the source interpolant),
    a :class:`ProductGrid`, or an ``(m, n)`` array, both in original
    coordinates.
    """

    epsilon: float
    points: object = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if isinstance(self.points, np.ndarray) and self.points.size == 0:
            raise ValueError("point set must be non-empty")


@dataclass(frozen=True)
class ReducedPolynomial:
    """Truncated hierarchical representation.

    ``levels[j]`` for ``j < n - 1`` has shape
    ``(M_1+1, ..., M_{j+1}+1, N_{j+1}+1)`` (Chebyshev coefficients of the
    level functions along the last axis); the terminal ``levels[n-1]`` has
    shape ``(M_1+1, ..., M_{n-1}+1, N_n+1)``. ``retained`` holds the ``M_j``.
    """

    domain: Domain
    levels: tuple
    mse: float = float("nan")
    history: tuple = field(default=(), repr=False)

    def __post_init__(self):
        levels = tuple(np.ascontiguousarray(a, dtype=np.float64) for a in self.levels)
        n = self.domain.ndim
        if len(levels) != n or n < 2:
            raise DimensionError(f"need {n} level arrays (n >= 2), got {len(levels)}")
        ms = [a.shape[-2] - 1 for a in levels[:-1]]
        for j, a in enumerate(levels):
            want_batch = tuple(m + 1 for m in ms[:j + 1]) if j < n - 1 else tuple(m + 1 for m in ms)
            if a.shape[:-1] != want_batch:
                raise DimensionError(f"level {j + 1} has shape {a.shape}, batch should be {want_batch}")
            if a.shape[-1] < 2:
                raise DimensionError(f"level {j + 1}: degree must be >= 1")
        object.__setattr__(self, "levels", levels)

    @property
    def ndim(self) -> int:
        return self.domain.ndim

    @property
    def degrees(self) -> tuple:
        return tuple(a.shape[-1] - 1 for a in self.levels)

    @property
    def retained(self) -> tuple:
        return tuple(a.shape[-2] - 1 for a in self.levels[:-1])

    @property
    def nbytes(self) -> int:
        return 8 * sum(a.size for a in self.levels)

    def _grid_sampler(self, grid: ProductGrid):
        if grid.ndim != self.ndim:
            raise DimensionError(f"grid has {grid.ndim} dimensions, polynomial has {self.ndim}")
        return _GridSampler([cheb_poly_values(N, self.domain.to_reference_1d(j, v))
                             for j, (N, v) in enumerate(zip(self.degrees, grid.values))])

    def eval_grid(self, grid: ProductGrid) -> np.ndarray:
        return _fold(self._grid_sampler(grid), self.levels)

    def eval_reference_points(self, x_ref) -> np.ndarray:
        x_ref = np.atleast_2d(np.asarray(x_ref, dtype=np.float64))
        return _fold(_PointSampler(x_ref, self.degrees), self.levels)

    def eval_points(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return self.eval_reference_points(self.domain.to_reference(pts))

    def eval_point(self, point) -> float:
        p = np.asarray(point, dtype=np.float64).reshape(-1)
        if p.size != self.ndim:
            raise DimensionError(f"expected {self.ndim} coordinates, got {p.size}")
        return float(self.eval_grid(ProductGrid(tuple(p[:, None]))).reshape(-1)[0])

    __call__ = eval_point

    def expand(self) -> np.ndarray:
        """Full coefficient tensor of the represented polynomial."""
        return _fold(_GridSampler([np.eye(N + 1) for N in self.degrees]), self.levels)


@dataclass(frozen=True)
class LevelDecomposition:
    """Result of one greedy orthonormalization.

    ``basis[k]`` are coefficient tensors of the orthonormal functions in the
    remaining variables, ``coeffs[k]`` the Chebyshev coefficients of the
    matching univariate factor ``A_k(x) = <P, q_k>``, and ``order[k]`` the
    index of the node slice that seeded ``q_k``.
    """

    basis: np.ndarray
    coeffs: np.ndarray
    order: tuple


# --------------------------------------------------------------------------
# operations


def nodal_slices(p, axis: int = 0) -> np.ndarray:
    """Restrictions ``P(alpha_i, ...)`` of ``p`` to the nodes of ``axis``.

    ``p`` is an :class:`Interpolant` or a coefficient tensor. Returns an
    array whose leading index ``i`` runs over the ``N_axis + 1`` reference
    nodes (descending) and whose remaining axes are coefficient tensors in
    the other variables.
    """
    c = p.full_coeffs() if isinstance(p, Interpolant) else np.asarray(p, dtype=np.float64)
    if not 0 <= axis < c.ndim:
        raise DimensionError(f"invalid axis {axis}")
    N = c.shape[axis] - 1
    v = cheb_poly_values(N, reference_nodes(N)).T  # v[i, l] = T_l(alpha_i)
    return np.tensordot(v, np.moveaxis(c, axis, 0), axes=(1, 0))


def greedy_orthonormal_level(slices, residual_target: float = 1e-14) -> LevelDecomposition:
    """Greedy weighted Gram-Schmidt over node slices of one variable.

    Parameters
    ----------
    slices : array_like, shape (N+1, ...)
        ``slices[i]`` is the coefficient tensor of ``P(alpha_i, rest)``.
    residual_target : float
        Stop once the weighted norm of the residual falls below this
        fraction of ``||P||``.
    """
    s = np.asarray(slices, dtype=np.float64)
    n1 = s.shape[0]
    rest_shape = s.shape[1:]
    S = s.reshape(n1, -1)
    w = chebyshev_weights(rest_shape).reshape(-1) if rest_shape else np.ones(1)
    wx = chebyshev_weights((n1,))
    # coefficients of P along the split variable, one column per rest coefficient
    pc = _coeffs_leading_axis(S)
    resid = pc.copy()
    p_norm = np.sqrt(np.sum(wx[:, None] * w * pc * pc))
    slice_norms = np.sqrt(np.sum(w * S * S, axis=1))
    empty = LevelDecomposition(np.zeros((0,) + rest_shape), np.zeros((0, n1)), ())
    if p_norm == 0.0 or slice_norms.max() == 0.0:
        return empty

    floor = DEGENERATE_RTOL * slice_norms.max()
    cand = S.copy()
    active = np.ones(n1, dtype=bool)
    basis, coeffs, order = [], [], []
    while True:
        norms = np.sqrt(np.sum(w * cand * cand, axis=1))
        active &= norms >= floor
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        qs = cand[idx] / norms[idx, None]
        proj = resid @ (w * qs).T  # (n1, len(idx)): <R, q_c> as series in x
        scores = wx @ (proj * proj)
        pick = int(idx[np.argmax(scores)])  # argmax returns the first maximum
        q = cand[pick] / norms[pick]
        for b in basis:  # one re-orthogonalization pass
            q = q - np.dot(w * q, b) * b
        q /= np.sqrt(np.sum(w * q * q))
        a = pc @ (w * q)
        resid -= np.outer(a, q)
        basis.append(q)
        coeffs.append(a)
        order.append(pick)
        active[pick] = False
        cand[active] -= np.outer(cand[active] @ (w * q), q)
        if np.sqrt(np.sum(wx[:, None] * w * resid * resid)) < residual_target * p_norm:
            break
    if not basis:
        return empty
    return LevelDecomposition(np.array(basis).reshape((len(basis),) + rest_shape),
                              np.array(coeffs), tuple(order))


def _phi_sampler(p_domain: Domain, degrees, points):
    if points is None:
        return _GridSampler([cheb_poly_values(N, reference_nodes(N)) for N in degrees])
    if isinstance(points, ProductGrid):
        if points.ndim != p_domain.ndim:
            raise DimensionError("control grid dimensionality mismatch")
        return _GridSampler([cheb_poly_values(N, p_domain.to_reference_1d(j, v))
                             for j, (N, v) in enumerate(zip(degrees, points.values))])
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    return _PointSampler(p_domain.to_reference(pts), degrees)


def _roundoff_floor(target) -> float:
    return (1e-12 * (1.0 + float(np.max(np.abs(target))))) ** 2


def compress(p: Interpolant, spec: TruncationSpec,
             below_floor: str = "warn") -> ReducedPolynomial:
    """Hierarchically orthonormalize ``p`` and truncate to the MSE budget.

    At level ``j`` every current branch is decomposed along ``x_j``; the
    shared count ``M_j`` is the smallest one for which the truncated
    polynomial has mean squared deviation from ``p`` below
    ``spec.epsilon`` on the control points.

    When ``epsilon`` lies under the round-off floor of the untruncated
    level, all basis functions are kept and a ``RuntimeWarning`` is issued;
    pass ``below_floor="raise"`` to get a :class:`ToleranceError` instead.

    Raises
    ------
    ToleranceError
        If even the untruncated level misses ``epsilon`` by more than
        round-off, or it misses by round-off only and ``below_floor`` is
        ``"raise"``. ``exc.floor`` holds the achievable MSE.
    """
    if below_floor not in ("warn", "raise"):
        raise ValueError(f"below_floor must be 'warn' or 'raise', got {below_floor!r}")
    c = p.full_coeffs()
    n = c.ndim
    if n < 2:
        raise DimensionError("compress needs at least 2 variables")
    degrees = [s - 1 for s in c.shape]
    sampler = _phi_sampler(p.domain, degrees, spec.points)
    target = sampler.tensor(0, c)
    eps = spec.epsilon

    levels = []
    prefix = []  # evaluated, already truncated level arrays
    history = []
    branches = c  # shape (M_1+1, ..., M_j+1, N_{j+1}+1, ..., N_n+1)
    for j in range(n - 1):
        batch = branches.shape[:j]
        nb = int(np.prod(batch, dtype=np.int64))
        n1 = degrees[j] + 1
        rest = branches.shape[j + 1:]
        flat = branches.reshape((nb, n1) + rest)
        a_full = np.zeros((nb, n1, n1))
        q_full = np.zeros((nb, n1) + rest)
        for b in range(nb):
            dec = greedy_orthonormal_level(nodal_slices(flat[b], 0))
            k = len(dec.order)
            a_full[b, :k] = dec.coeffs
            q_full[b, :k] = dec.basis
        a_full = a_full.reshape(batch + (n1, n1))
        q_full = q_full.reshape(batch + (n1,) + rest)

        ev_a = sampler.series(j, a_full)
        ev_q = sampler.tensor(j + 1, q_full)
        approx = np.zeros_like(target)
        mses = np.empty(n1)
        for m in range(n1):
            pick = (slice(None),) * j + (slice(m, m + 1),)
            term = sampler.combine(ev_a[pick], ev_q[pick])
            for i in range(j - 1, -1, -1):
                term = sampler.combine(prefix[i], term)
            approx += term
            d = target - approx
            mses[m] = np.mean(d * d)
        history.append(mses)
        ok = np.flatnonzero(mses < eps)
        if ok.size:
            M = int(ok[0])
        else:
            floor = float(mses[-1])
            if floor > _roundoff_floor(target):
                raise ToleranceError(
                    f"epsilon={eps:g} unattainable: untruncated MSE on control points is {floor:g}",
                    floor)
            if below_floor == "raise":
                raise ToleranceError(
                    f"epsilon={eps:g} is below the round-off floor {floor:g} at level {j + 1}",
                    floor)
            warnings.warn(f"epsilon={eps:g} is below round-off (floor {floor:g}); keeping all "
                          f"basis functions at level {j + 1}", RuntimeWarning, stacklevel=2)
            M = n1 - 1
        log.debug("level %d: M=%d, mse=%g", j + 1, M, mses[M])
        levels.append(a_full[..., :M + 1, :])
        prefix.append(ev_a[..., :M + 1, :])
        branches = q_full[(slice(None),) * j + (slice(0, M + 1),)]
    levels.append(branches)

    q = ReducedPolynomial(p.domain, tuple(levels), history=tuple(history))
    d = _fold(sampler, q.levels) - target
    mse = float(np.mean(d * d))
    if not mse < eps and mse > _roundoff_floor(target):
        raise ToleranceError(f"reduced polynomial misses epsilon: mse={mse:g}", mse)
    return ReducedPolynomial(p.domain, q.levels, mse=mse, history=tuple(history))


def eval_reduced_grid(q: ReducedPolynomial, grid: ProductGrid) -> np.ndarray:
    """Evaluate the reduced polynomial on a product grid (nested batched folds)."""
    return q.eval_grid(grid)


def storage_report(q: ReducedPolynomial, p_extents=None) -> dict:
    """Byte counts of the full tensor and the reduced hierarchy."""
    ext = p_extents if p_extents is not None else [N + 1 for N in q.degrees]
    full = 8 * int(np.prod(ext, dtype=np.int64))
    reduced = q.nbytes
    return {"full_bytes": full, "reduced_bytes": reduced,
            "savings_fraction": 1.0 - reduced / full}


def mse_at(p, q, points: Optional[object] = None) -> float:
    """MSE between two polynomials on a control grid/point set (default: nodes of ``p``)."""
    if points is None:
        from .interpolant import node_grid
        points = node_grid(p.domain, p.degrees)
    if isinstance(points, ProductGrid):
        d = p.eval_grid(points) - q.eval_grid(points)
    else:
        d = p.eval_points(points) - q.eval_points(points)
    return float(np.mean(d * d))
