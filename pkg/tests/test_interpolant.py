import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chebrb.errors import DimensionError, DomainError, OracleError
from chebrb.interpolant import (Domain, Interpolant, ProductGrid, build, control_grid, eval_grid,
                                eval_point, fd_partial, mse_on_grid, node_grid, split,
                                to_reference)
from chebrb.models import lognormal_call

from oracles import tensor_series_value


def random_interpolant(rng, degrees, bounds=None):
    bounds = bounds or [(rng.uniform(-2, 0), rng.uniform(0.5, 3)) for _ in degrees]
    return Interpolant(Domain.from_bounds(bounds), rng.standard_normal([N + 1 for N in degrees]))


def random_grid(rng, dom, sizes):
    return ProductGrid(tuple(rng.uniform(lo, hi, q) for (lo, hi), q in zip(dom.bounds, sizes)))


# ------------------------------------------------------------------ domain


def test_to_reference_examples():
    assert to_reference(Domain.from_bounds([(0, 365)]), [365.0])[0] == 1.0
    assert to_reference(Domain.from_bounds([(0.75, 1.20)]), [0.975])[0] == pytest.approx(0, abs=1e-15)
    v = to_reference(Domain.from_bounds([(0.02, 0.085)]), [0.05])[0]
    assert v == pytest.approx((0.05 - 0.0525) / 0.0325, abs=1e-14)
    assert v == pytest.approx(-0.076923, abs=1e-6)


def test_to_reference_out_of_bounds_names_dimension():
    dom = Domain.from_bounds([(0, 1), (0, 2)])
    with pytest.raises(DomainError, match="dimension 1: value 2.5"):
        to_reference(dom, [0.5, 2.5])


def test_domain_requires_ordered_bounds():
    with pytest.raises(DomainError):
        Domain.from_bounds([(1, 1)])


def test_from_reference_roundtrip(rng):
    dom = Domain.from_bounds([(0, 3), (-1, 5)])
    x = rng.uniform(-1, 1, (10, 2))
    np.testing.assert_allclose(dom.to_reference(dom.from_reference(x)), x, atol=1e-15)


# ------------------------------------------------------------------- build


def test_build_constant():
    p = build(lambda x: 2.5, Domain.from_bounds([(0, 1), (3, 7)]), [3, 4])
    expect = np.zeros((4, 5))
    expect[0, 0] = 2.5
    np.testing.assert_allclose(p.coeffs, expect, atol=1e-14)


def test_build_linear_exact(rng):
    p = build(lambda x: x[0] + x[1], Domain.from_bounds([(0, 1), (0, 1)]), [1, 1])
    pts = rng.uniform(0, 1, (100, 2))
    np.testing.assert_allclose(p.eval_points(pts), pts.sum(axis=1), atol=1e-13)


def test_build_lognormal_degree12(rng):
    # spot, daily variance, maturity in days
    bounds = [(0.9, 1.1), (1e-4, 2e-4), (180, 365)]

    def f(x):
        return lognormal_call(x[:, 0], 1.0, 0.05 / 365 * x[:, 2], x[:, 1] * x[:, 2])

    p = build(f, Domain.from_bounds(bounds), [12, 12, 12], vectorized=True)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    pts = lo + (hi - lo) * rng.uniform(0.0, 1.0, (1000, 3))
    exact = f(pts)
    err = np.abs(p.eval_points(pts) - exact)
    assert np.all(err < 1e-6 * exact)


def test_build_node_exactness(rng):
    dom = Domain.from_bounds([(0, 1), (1, 2), (-3, -1)])
    f = lambda x: np.exp(x[0]) * np.sin(3 * x[1]) + x[2] ** 3
    p = build(f, dom, [6, 5, 4])
    grid = node_grid(dom, p.degrees)
    ref = np.array([f(x) for x in grid.points()]).reshape(grid.shape)
    assert np.max(np.abs(p.eval_grid(grid) - ref)) <= 1e-12 * (1 + np.abs(ref).max())


def test_node_error_scales_with_largest_value():
    # prices spanning many decades: the node error is round-off of the largest
    # value, so tiny prices carry large relative but negligible absolute error
    dom = Domain.from_bounds([(0.8, 1.2), (5, 30)])
    f = lambda x: lognormal_call(x[:, 0], 1.0, 0.0, 1e-4 * x[:, 1])
    p = build(f, dom, [6, 6], vectorized=True)
    grid = node_grid(dom, p.degrees)
    ref = f(grid.points()).reshape(grid.shape)
    assert ref.max() / ref.min() > 1e6
    assert np.max(np.abs(p.eval_grid(grid) - ref)) <= 1e-14 * ref.max()


def test_build_threads_same_result():
    dom = Domain.from_bounds([(0, 1), (0, 1)])
    f = lambda x: np.cos(x[0] + 2 * x[1])
    a = build(f, dom, [5, 6])
    b = build(f, dom, [5, 6], threads=4)
    assert np.array_equal(a.coeffs, b.coeffs)


def test_build_oracle_failure_carries_node():
    dom = Domain.from_bounds([(0, 1)])

    def bad(x):
        if x[0] < 0.1:
            raise ValueError("boom")
        return 1.0

    with pytest.raises(OracleError) as info:
        build(bad, dom, [4])
    assert info.value.node is not None and info.value.node[0] == 0.0


def test_build_rejects_bad_degrees():
    dom = Domain.from_bounds([(0, 1), (0, 1)])
    with pytest.raises(DomainError):
        build(lambda x: 0.0, dom, [0, 3])
    with pytest.raises(DimensionError):
        build(lambda x: 0.0, dom, [3])


@given(st.lists(st.integers(1, 5), min_size=1, max_size=3), st.integers(0, 2**31))
def test_degree_exactness(degrees, seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal([N + 1 for N in degrees])
    dom = Domain.from_bounds([(-1, 1)] * len(degrees))
    p = build(lambda x: tensor_series_value(c, x), dom, degrees)
    np.testing.assert_allclose(p.coeffs, c, atol=1e-11)
    x = rng.uniform(-1, 1, (5, len(degrees)))
    np.testing.assert_allclose(p.eval_points(x), [tensor_series_value(c, xi) for xi in x],
                               atol=1e-11)


# -------------------------------------------------------------- evaluation


def test_eval_grid_identity():
    p = build(lambda x: x[0], Domain.from_bounds([(-1, 1)]), [1])
    np.testing.assert_allclose(p.eval_grid(ProductGrid((np.array([-0.5, 0.5]),))), [-0.5, 0.5],
                               atol=1e-15)


def test_eval_grid_matches_pointwise(rng):
    p = random_interpolant(rng, [3, 4, 2])
    grid = random_grid(rng, p.domain, (4, 3, 5))
    out = p.eval_grid(grid)
    assert out.shape == (4, 3, 5)
    ref = np.array([tensor_series_value(p.coeffs, p.domain.to_reference(x))
                    for x in grid.points()]).reshape(grid.shape)
    np.testing.assert_allclose(out, ref, atol=1e-12 * (1 + np.abs(ref).max()))


def test_eval_grid_singleton_axis(rng):
    p = random_interpolant(rng, [3, 3, 3])
    grid = random_grid(rng, p.domain, (3, 1, 2))
    out = eval_grid(p, grid)
    assert out.shape == (3, 1, 2)
    np.testing.assert_allclose(out.reshape(-1), p.eval_points(grid.points()), atol=1e-12)


def test_eval_grid_dimension_mismatch(rng):
    p = random_interpolant(rng, [2, 2])
    with pytest.raises(DimensionError):
        p.eval_grid(ProductGrid((np.array([0.0]),)))


def test_eval_grid_out_of_domain():
    p = Interpolant(Domain.from_bounds([(0, 1), (0, 1)]), np.ones((2, 2)))
    with pytest.raises(DomainError):
        p.eval_grid(ProductGrid((np.array([0.5]), np.array([1.5]))))


def test_eval_point_constant():
    c = np.zeros((3, 4))
    c[0, 0] = -1.25
    p = Interpolant(Domain.from_bounds([(0, 1), (2, 3)]), c)
    assert eval_point(p, [0.3, 2.9]) == pytest.approx(-1.25, abs=1e-15)
    assert p([0.0, 3.0]) == pytest.approx(-1.25, abs=1e-15)


def test_eval_point_at_node():
    dom = Domain.from_bounds([(0, 2), (1, 4)])
    f = lambda x: np.log1p(x[0]) + x[1] ** 2
    p = build(f, dom, [4, 5])
    grid = node_grid(dom, [4, 5])
    x = np.array([grid.values[0][1], grid.values[1][3]])
    assert p.eval_point(x) == pytest.approx(f(x), abs=1e-13)


def test_eval_point_generating_polynomial(rng):
    c = rng.standard_normal((3, 4, 3))
    dom = Domain.from_bounds([(-1, 1)] * 3)
    p = Interpolant(dom, c)
    x = rng.uniform(-1, 1, 3)
    assert p.eval_point(x) == pytest.approx(tensor_series_value(c, x), abs=1e-12)


def test_eval_point_wrong_size(rng):
    p = random_interpolant(rng, [2, 2])
    with pytest.raises(DimensionError):
        p.eval_point([0.0])


@given(st.integers(0, 2**31))
def test_grid_equals_points(seed):
    rng = np.random.default_rng(seed)
    degrees = list(rng.integers(1, 6, rng.integers(1, 4)))
    p = random_interpolant(rng, degrees)
    grid = random_grid(rng, p.domain, rng.integers(1, 4, len(degrees)))
    np.testing.assert_allclose(p.eval_grid(grid).reshape(-1), p.eval_points(grid.points()),
                               atol=1e-12 * (1 + np.abs(p.coeffs).sum()))


def test_partial_fixes_dimensions(rng):
    p = random_interpolant(rng, [3, 4, 2])
    x = rng.uniform(p.domain.lower, p.domain.upper, (6, 3))
    x[:, 1] = x[0, 1]
    q = p.partial({1: x[0, 1]})
    assert q.ndim == 2
    np.testing.assert_allclose(q.eval_points(x[:, [0, 2]]), p.eval_points(x), atol=1e-12)


# ----------------------------------------------------------- differentiation


def test_fd_partial_linear():
    p = build(lambda x: x[0], Domain.from_bounds([(0, 2)]), [2])
    assert fd_partial(p, [0.7], 0, 1e-6) == pytest.approx(1.0, abs=1e-9)


def test_fd_partial_square():
    p = build(lambda x: x[0] ** 2, Domain.from_bounds([(0, 1)]), [4])
    assert fd_partial(p, [0.5], 0, 1e-6) == pytest.approx(1.0, abs=1e-5)


def test_fd_partial_upper_bound_uses_backward_step():
    p = build(lambda x: x[0] ** 2, Domain.from_bounds([(0, 1)]), [4])
    assert fd_partial(p, [1.0], 0, 1e-6) == pytest.approx(2.0, abs=1e-5)


def test_fd_partial_first_order():
    p = build(lambda x: np.sin(2 * x[0]), Domain.from_bounds([(-1, 1)]), [20])
    exact = 2 * np.cos(2 * 0.3)
    e1 = abs(fd_partial(p, [0.3], 0, 1e-3) - exact)
    e2 = abs(fd_partial(p, [0.3], 0, 5e-4) - exact)
    assert e2 / e1 == pytest.approx(0.5, abs=0.05)


def test_fd_partial_bad_step():
    p = build(lambda x: x[0], Domain.from_bounds([(0, 1)]), [1])
    with pytest.raises(DomainError):
        fd_partial(p, [0.5], 0, 0.0)


# ------------------------------------------------------------------- split


def test_split_at_node_matches_slice(rng):
    p = random_interpolant(rng, [3, 4, 2])
    s = split(p, 1)
    assert len(s.split.slices) == 5
    node = node_grid(p.domain, p.degrees).values[1][2]
    rest = random_grid(rng, Domain(p.domain.lower[[0, 2]], p.domain.upper[[0, 2]]), (3, 2))
    grid = ProductGrid((rest.values[0], np.array([node]), rest.values[1]))
    sl = Interpolant(Domain(p.domain.lower[[0, 2]], p.domain.upper[[0, 2]]), s.split.slices[2])
    np.testing.assert_allclose(s.eval_grid(grid)[:, 0, :], sl.eval_grid(rest), atol=1e-12)


def test_split_agrees_with_unsplit(rng):
    p = random_interpolant(rng, [4, 6, 3])
    s = split(p, 1)
    x = rng.uniform(p.domain.lower, p.domain.upper, (200, 3))
    np.testing.assert_allclose(s.eval_points(x), p.eval_points(x), atol=1e-11)
    grid = random_grid(rng, p.domain, (3, 4, 2))
    np.testing.assert_allclose(s.eval_grid(grid), p.eval_grid(grid), atol=1e-11)
    np.testing.assert_allclose(s.full_coeffs(), p.coeffs, atol=1e-12)


def test_split_constant_axis_gives_identical_slices(rng):
    c = np.zeros((3, 5, 4))
    c[:, 0, :] = rng.standard_normal((3, 4))
    s = split(Interpolant(Domain.from_bounds([(0, 1)] * 3), c), 1)
    for sl in s.split.slices[1:]:
        np.testing.assert_allclose(sl, s.split.slices[0], atol=1e-14)


def test_split_invalid_axis(rng):
    p = random_interpolant(rng, [2, 2])
    with pytest.raises(DimensionError):
        split(p, 2)


def test_build_split_directly_matches_split():
    dom = Domain.from_bounds([(0, 1), (1, 2), (0, 0.5)])
    f = lambda x: np.exp(-x[0] * x[1]) + x[2]
    full = build(f, dom, [4, 5, 3])
    direct = build(f, dom, [4, 5, 3], split_axis=0)
    assert direct.is_split and direct.degrees == full.degrees
    np.testing.assert_allclose(direct.full_coeffs(), full.coeffs, atol=1e-13)


# --------------------------------------------------------------------- mse


def test_mse_zero_and_shift(rng):
    p = random_interpolant(rng, [2, 3])
    grid = control_grid(p.domain, 5)
    vals = p.eval_grid(grid)
    assert mse_on_grid(p, vals, grid) == 0.0
    assert mse_on_grid(p, vals - 0.3, grid) == pytest.approx(0.09, rel=1e-12)


def test_mse_matches_loop(rng):
    p = random_interpolant(rng, [2, 3])
    grid = control_grid(p.domain, 6)
    ref = rng.standard_normal(grid.shape)
    vals = p.eval_grid(grid)
    loop = sum((vals[i] - ref[i]) ** 2 for i in np.ndindex(grid.shape)) / ref.size
    assert mse_on_grid(p, ref, grid) == pytest.approx(loop, rel=1e-15)


def test_mse_shape_mismatch(rng):
    p = random_interpolant(rng, [2, 3])
    with pytest.raises(DimensionError):
        mse_on_grid(p, np.zeros((2, 2)), control_grid(p.domain, 4))


def test_control_grid_interior():
    g = control_grid(Domain.from_bounds([(0, 1)]), 4)
    np.testing.assert_allclose(g.values[0], [0.25, 0.5, 0.75])
