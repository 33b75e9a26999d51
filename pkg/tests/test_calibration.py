import numpy as np
import pytest

from chebrb.calibration import (CalibrationOptions, MonteCarloPricer, PolynomialPricer,
                                calibrate, default_box, fd_gradient, in_mse, predict_and_score)
from chebrb.errors import DomainError
from chebrb.interpolant import Domain, build
from chebrb.models import (FREE_PARAMETERS, NGARCH_DEFAULTS, McConfig, lognormal_oracle,
                           make_quote_grid)
from chebrb.quotes import QuoteSet
from chebrb.reduced_basis import TruncationSpec, compress

NAMES = ["sigma2_0", "beta1", "s0", "t_m"]
BOUNDS = [(0.5e-4, 1.5e-4), (0.8, 0.9), (0.75, 1.2), (5, 365)]
HELD = {k: NGARCH_DEFAULTS[k] for k in FREE_PARAMETERS if k not in NAMES}
TRUE = {"sigma2_0": 1.1e-4, "beta1": 0.83}
SPOTS = np.arange(0.80, 1.1801, 0.02)
MATS = np.arange(10, 341, 30)


@pytest.fixture(scope="module")
def poly():
    fixed = {k: v for k, v in NGARCH_DEFAULTS.items() if k not in NAMES}
    return build(lognormal_oracle(NAMES, fixed), Domain.from_bounds(BOUNDS), [4, 4, 12, 10],
                 vectorized=True)


@pytest.fixture(scope="module")
def pricer(poly):
    return PolynomialPricer(poly, NAMES)


@pytest.fixture(scope="module")
def box():
    return Domain.from_bounds(BOUNDS[:2])


def grid_quotes(spots=SPOTS, mats=MATS):
    return make_quote_grid(lambda s, t: np.zeros_like(s), spots, mats)


@pytest.fixture(scope="module")
def quotes(pricer):
    q = grid_quotes()
    return q.with_prices(pricer.prices({**HELD, **TRUE}, q))


# ------------------------------------------------------------------ in_mse


def test_in_mse_self_consistent(quotes, pricer):
    assert in_mse({**HELD, **TRUE}, quotes, pricer) == 0.0


def test_in_mse_offset(quotes, pricer):
    shifted = quotes.with_prices(quotes.price + 0.01)
    assert in_mse({**HELD, **TRUE}, shifted, pricer) == pytest.approx(1e-4, rel=1e-9)


def test_in_mse_matches_loop(quotes, pricer, rng):
    params = {**HELD, "sigma2_0": 0.8e-4, "beta1": 0.86}
    noisy = quotes.with_prices(np.abs(quotes.price + 0.01 * rng.standard_normal(len(quotes))))
    model = pricer.prices(params, noisy)
    loop = sum((noisy.price[i] - model[i]) ** 2 for i in range(len(noisy))) / len(noisy)
    assert in_mse(params, noisy, pricer) == pytest.approx(loop, rel=1e-14)


def test_in_mse_domain_error_names_coordinate(quotes, pricer):
    with pytest.raises(DomainError, match="beta1=0.95"):
        in_mse({**HELD, "sigma2_0": 1e-4, "beta1": 0.95}, quotes, pricer)
    far = grid_quotes(spots=[1.5], mats=[30])
    with pytest.raises(DomainError, match="s0"):
        in_mse({**HELD, **TRUE}, far, pricer)


def test_strike_homogeneity(pricer):
    q1 = QuoteSet([1.0], [1.0], [90], [0.05], [0.0])
    q2 = QuoteSet([2.0], [2.0], [90], [0.05], [0.0])
    p = {**HELD, **TRUE}
    assert pricer.prices(p, q2)[0] == pytest.approx(2 * pricer.prices(p, q1)[0], rel=1e-14)


def test_pricer_floor(poly):
    q = grid_quotes(spots=[0.8], mats=[10])
    raw = PolynomialPricer(poly, NAMES, floor=False).prices({**HELD, **TRUE}, q)
    floored = PolynomialPricer(poly, NAMES).prices({**HELD, **TRUE}, q)
    assert floored[0] == max(raw[0], 0.0)


def test_pricer_validation(poly):
    with pytest.raises(ValueError):
        PolynomialPricer(poly, NAMES[:3])
    with pytest.raises(ValueError):
        PolynomialPricer(poly, ["sigma2_0", "beta1", "s0", "bogus"])


def test_mc_backend_self_consistent():
    cfg = McConfig(paths=2000, seed=3)
    mc = MonteCarloPricer(cfg)
    q = grid_quotes(spots=[0.95, 1.0, 1.05], mats=[0, 10, 20])
    params = {k: NGARCH_DEFAULTS[k] for k in FREE_PARAMETERS}
    q = q.with_prices(mc.prices(params, q))
    assert in_mse(params, q, mc) == 0.0
    assert np.all(q.price[q.maturity_days == 0] == np.maximum(q.spot[q.maturity_days == 0] - 1, 0))


# ---------------------------------------------------------------- calibrate


@pytest.fixture(scope="module")
def fitted(quotes, pricer, box):
    return calibrate(quotes, pricer, box, fixed=HELD)


def test_round_trip(fitted, quotes, pricer):
    assert fitted.in_mse < 1e-12
    assert fitted.converged
    model = pricer.prices(fitted.params, quotes)
    np.testing.assert_allclose(model, quotes.price, atol=1e-6)
    assert set(fitted.params) == set(FREE_PARAMETERS)
    for k, v in HELD.items():
        assert fitted.params[k] == v


def test_result_inside_box_and_below_starts(fitted, box):
    for k, (lo, hi) in zip(["sigma2_0", "beta1"], box.bounds):
        assert lo <= fitted.params[k] <= hi
    assert all(fitted.in_mse <= s for s in fitted.start_values)
    assert np.isfinite(fitted.grad_norm)


def test_deterministic(quotes, pricer, box):
    opts = CalibrationOptions(starts=2, maxiter=300)
    a = calibrate(quotes, pricer, box, opts, fixed=HELD)
    b = calibrate(quotes, pricer, box, opts, fixed=HELD)
    assert a == b


def test_threads_match_serial(quotes, pricer, box):
    a = calibrate(quotes, pricer, box, CalibrationOptions(starts=3, maxiter=300), fixed=HELD)
    b = calibrate(quotes, pricer, box, CalibrationOptions(starts=3, maxiter=300, threads=3),
                  fixed=HELD)
    assert a.params == b.params and a.in_mse == b.in_mse


def test_single_quote(pricer, box):
    q = grid_quotes(spots=[1.02], mats=[100])
    q = q.with_prices(pricer.prices({**HELD, "sigma2_0": 0.7e-4, "beta1": 0.88}, q))
    assert calibrate(q, pricer, box, fixed=HELD).in_mse < 1e-10


def test_gradient_method(quotes, pricer, box):
    res = calibrate(quotes, pricer, box, CalibrationOptions(method="gradient", starts=2,
                                                           maxiter=200), fixed=HELD)
    assert res.in_mse <= min(res.start_values)
    assert res.in_mse < 1e-8


def test_unimprovable_start_reports_not_converged(box):
    class Flat:
        def prices(self, params, quotes):
            return np.zeros(len(quotes))

    q = grid_quotes(spots=[1.0], mats=[30]).with_prices([0.1])
    res = calibrate(q, Flat(), box, CalibrationOptions(starts=2, maxiter=50), fixed=HELD)
    assert not res.converged
    assert res.in_mse == pytest.approx(0.01)


def test_calibrate_argument_checks(quotes, pricer, box):
    with pytest.raises(ValueError):
        calibrate(quotes, pricer, box)  # box has 2 dims, 5 parameters free
    with pytest.raises(ValueError):
        calibrate(quotes, pricer, box, fixed={"nope": 1.0})
    with pytest.raises(ValueError):
        calibrate(quotes, pricer, box, fixed={k: 0.1 for k in FREE_PARAMETERS})


def test_default_box():
    assert default_box().ndim == 5


def test_fd_gradient_backward_at_edge():
    g = fd_gradient(lambda u: float(u[0] ** 2 + 3 * u[1]), np.array([1.0, 0.0]), 1e-6)
    np.testing.assert_allclose(g, [2.0, 3.0], atol=1e-5)


# ----------------------------------------------------------------- predict


def test_predict_same_quotes_equals_in_sample(fitted, quotes, pricer):
    score = predict_and_score(fitted.params, quotes, pricer)
    err = np.abs(quotes.price - pricer.prices(fitted.params, quotes))
    assert score["mean_abs_err"] == pytest.approx(err.mean())
    assert score["max_abs_err"] == pytest.approx(err.max())


def test_self_prediction(pricer):
    out = grid_quotes(spots=np.arange(0.79, 1.1701, 0.02), mats=np.arange(25, 326, 30))
    out = out.with_prices(pricer.prices({**HELD, **TRUE}, out))
    assert len(out) == 220
    assert predict_and_score({**HELD, **TRUE}, out, pricer)["max_abs_err"] <= 1e-15


def test_reduced_backend_matches_full(poly, quotes, box):
    q = compress(poly, TruncationSpec(1e-10))
    full = PolynomialPricer(poly, NAMES)
    red = PolynomialPricer(q, NAMES)
    noisy = quotes.with_prices(quotes.price * 1.01)
    opts = CalibrationOptions(starts=2)
    a = calibrate(noisy, full, box, opts, fixed=HELD)
    b = calibrate(noisy, red, box, opts, fixed=HELD)
    assert b.in_mse <= 2 * a.in_mse
    assert a.in_mse <= 2 * b.in_mse
