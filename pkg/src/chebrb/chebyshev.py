"""Chebyshev series on [-1, 1]: nodes, FFT coefficients, derivatives, inner products.

Node ordering is descending throughout: node ``k`` is ``cos(pi k / N)``, so
``k = 0`` is the right end of the interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .tensor import as_ndarray, permute_cycle

_SLACK = 1e-12


@dataclass(frozen=True)
class ChebSeries1D:
    """Coefficients ``c_0 .. c_N`` of ``sum_l c_l T_l(x)``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=np.float64).reshape(-1)
        if c.size < 1:
            raise DimensionError("a Chebyshev series needs at least one coefficient")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        vals = self.coeffs @ cheb_poly_values(self.degree, x.reshape(-1))
        return vals.reshape(x.shape) if x.ndim else float(vals[0])


@dataclass(frozen=True)
class NodeGrid1D:
    """Chebyshev-Lobatto nodes mapped to ``[a, b]``, in descending order."""

    count: int
    bounds: tuple
    nodes: np.ndarray


def cheb_poly_values(degree_max: int, points) -> np.ndarray:
    """Matrix ``T[l, k] = T_l(points[k])`` for ``l = 0..degree_max``.

    Uses the three-term recurrence. Points must lie in [-1, 1] up to a
    1e-12 slack.
    """
    if degree_max < 0:
        raise DomainError(f"degree_max must be >= 0, got {degree_max}")
    x = np.asarray(points, dtype=np.float64).reshape(-1)
    if x.size and (np.any(x < -1 - _SLACK) or np.any(x > 1 + _SLACK) or not np.all(np.isfinite(x))):
        bad = x[(x < -1 - _SLACK) | (x > 1 + _SLACK) | ~np.isfinite(x)][0]
        raise DomainError(f"point {bad!r} outside [-1, 1]")
    out = np.empty((degree_max + 1, x.size))
    out[0] = 1.0
    if degree_max >= 1:
        out[1] = x
    two_x = 2.0 * x
    for l in range(2, degree_max + 1):
        out[l] = two_x * out[l - 1] - out[l - 2]
    return out


def nodes(N: int, a: float = -1.0, b: float = 1.0) -> NodeGrid1D:
    """The ``N + 1`` Chebyshev extrema mapped to ``[a, b]``."""
    if N < 1:
        raise DomainError(f"need N >= 1, got {N}")
    if not a < b:
        raise DomainError(f"need a < b, got [{a}, {b}]")
    k = np.arange(N + 1)
    x = np.cos(np.pi * k / N)
    # endpoints and midpoint should be exact, cos() leaves ~1e-17 residue
    x[0], x[-1] = 1.0, -1.0
    if N % 2 == 0:
        x[N // 2] = 0.0
    mapped = 0.5 * (x * (b - a) + (b + a))
    mapped[0], mapped[-1] = b, a
    return NodeGrid1D(count=N + 1, bounds=(float(a), float(b)), nodes=mapped)


def reference_nodes(N: int) -> np.ndarray:
    """Nodes on [-1, 1] (shortcut for ``nodes(N).nodes``)."""
    return nodes(N).nodes


def _coeffs_leading_axis(values: np.ndarray) -> np.ndarray:
    """Even-extension FFT transform applied to every column of axis 0."""
    n1 = values.shape[0]
    N = n1 - 1
    flat = values.reshape(n1, -1)
    # z = [F0, F1, ..., FN, F_{N-1}, ..., F1], length 2N
    z = np.concatenate([flat, flat[N - 1:0:-1]], axis=0)
    y = np.fft.fft(z, axis=0).real / (2 * N)
    out = np.empty_like(flat)
    out[0] = y[0]
    if N > 1:
        out[1:N] = y[1:N] + y[2 * N - 1:N:-1]
    out[N] = y[N]
    return out.reshape(values.shape)


def coeffs_1d(values_at_nodes) -> ChebSeries1D:
    """Chebyshev coefficients of the interpolant through values at the nodes.

    ``values_at_nodes[k]`` is the function value at ``cos(pi k / N)``.
    """
    v = np.asarray(values_at_nodes, dtype=np.float64).reshape(-1)
    if v.size < 2:
        raise DomainError(f"need at least 2 node values, got {v.size}")
    return ChebSeries1D(_coeffs_leading_axis(v))


def coeffs_nd(values) -> np.ndarray:
    """Coefficient tensor of the tensor-product interpolant through ``values``.

    One sweep per axis: transform along the leading axis, then rotate the
    axes so the next variable comes first. After ``n`` sweeps the axes are
    back in their original order.
    """
    b = as_ndarray(values)
    if min(b.shape) < 2:
        raise DomainError(f"every extent must be >= 2, got {b.shape}")
    if b.ndim == 1:
        return _coeffs_leading_axis(b)
    for _ in range(b.ndim):
        b = permute_cycle(_coeffs_leading_axis(b))
    return b


def derivative_coeffs(s) -> ChebSeries1D:
    """Coefficients of the derivative of a Chebyshev series on [-1, 1].

    ``q_l = (2 / c_l) * sum_{j > l, j + l odd} j p_j`` with ``c_0 = 2``,
    ``c_l = 1`` otherwise. On a mapped interval ``[a, b]`` multiply by
    ``2 / (b - a)``.
    """
    p = s.coeffs if isinstance(s, ChebSeries1D) else np.asarray(s, dtype=np.float64).reshape(-1)
    N = p.size - 1
    if N < 1:
        raise DomainError("derivative needs at least 2 coefficients")
    q = np.zeros(N)
    # backward recurrence q_{l-1} = q_{l+1} + 2 l p_l, equivalent to the sum
    for l in range(N, 0, -1):
        q[l - 1] = (q[l + 1] if l + 1 < N else 0.0) + 2.0 * l * p[l]
    q[0] *= 0.5
    return ChebSeries1D(q)


def chebyshev_weights(extents) -> np.ndarray:
    """Tensor of weighted-norm factors ``prod_d w_{l_d}``, ``w_0 = pi``, ``w_l = pi/2``."""
    w = np.ones(())
    for n in extents:
        wd = np.full(n, np.pi / 2)
        wd[0] = np.pi
        w = np.multiply.outer(w, wd)
    return w


def weighted_dot(a, b) -> float:
    """Weighted L2 inner product of two Chebyshev series, computed on coefficients."""
    a = a.coeffs if isinstance(a, ChebSeries1D) else np.asarray(a, dtype=np.float64)
    b = b.coeffs if isinstance(b, ChebSeries1D) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.sum(chebyshev_weights(a.shape) * a * b))


def glc_quadrature(values_at_nodes) -> float:
    """Gauss-Lobatto-Chebyshev rule for ``int H(x) / sqrt(1 - x^2) dx``.

    ``values_at_nodes[j] = H(cos(pi j / N))``; end nodes get half weight.
    """
    h = np.asarray(values_at_nodes, dtype=np.float64).reshape(-1)
    if h.size < 2:
        raise DomainError(f"need at least 2 node values, got {h.size}")
    N = h.size - 1
    return float(np.pi / N * (0.5 * h[0] + h[1:N].sum() + 0.5 * h[N]))
