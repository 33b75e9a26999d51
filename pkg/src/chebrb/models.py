"""Pricing oracles for European calls.

* :func:`ngarch_price` -- Monte Carlo under NGARCH(1,1) risk-neutral dynamics,
  one step per trading day.
* :func:`heston_price` -- Heston stochastic volatility, full-truncation Euler
  with daily steps; used to produce synthetic market quotes.
* :func:`lognormal_call` -- closed form with aggregate drift and variance,
  used as a validation oracle and (via :func:`ngarch_lognormal_proxy`) as a
  cheap smooth stand-in for NGARCH prices.

Rates inside :class:`NgarchParams` are per day; everything quoted to the
outside world (quotes, boxes, CLI) uses annual rates divided by 365.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, SimulationError

DAYS_PER_YEAR = 365.0

# Parameter box for interpolant building (rates annual, t_m in days).
NGARCH_BOX = {
    "t_m": (0.0, 365.0),
    "sigma2_0": (0.25e-4, 2.25e-4),
    "s0": (0.75, 1.20),
    "r": (0.02, 0.085),
    "beta0": (0.0, 2e-6),
    "beta1": (0.60, 0.95),
    "beta2": (0.02, 0.25),
    "lambda_theta": (0.20, 2.0),
}
NGARCH_VARIABLES = tuple(NGARCH_BOX)
# Values for variables held fixed when not listed; a stationary parameter set
# (beta1 + beta2 (1 + lambda_theta^2) < 1).
NGARCH_DEFAULTS = {
    "t_m": 90.0,
    "sigma2_0": 1e-4,
    "s0": 1.0,
    "r": 0.05,
    "beta0": 1e-6,
    "beta1": 0.85,
    "beta2": 0.05,
    "lambda_theta": 0.5,
}
FREE_PARAMETERS = ("sigma2_0", "beta0", "beta1", "beta2", "lambda_theta")

HESTON_BOX = {
    "t_m": (0.0, 365.0),
    "s0": (0.75, 1.20),
    "r": (0.02, 0.085),
    "kappa": (0.5, 5.0),
    "theta_star": (0.01, 0.09),
    "sigma_star": (0.05, 0.6),
    "v0": (0.01, 0.09),
    "rho": (-0.9, 0.0),
}
HESTON_DEFAULTS = {
    "t_m": 90.0,
    "s0": 1.0,
    "r": 0.05,
    "kappa": 2.0,
    "theta_star": 0.04,
    "sigma_star": 0.3,
    "v0": 0.04,
    "rho": -0.5,
}


@dataclass(frozen=True)
class NgarchParams:
    """NGARCH(1,1) parameters; ``r`` per day, ``t_m`` in days, strike normalized to 1."""

    r: float
    beta0: float
    beta1: float
    beta2: float
    lambda_theta: float
    sigma2_0: float
    s0: float = 1.0
    t_m: int = 0

    def __post_init__(self):
        for name in ("beta0", "beta1", "beta2"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not self.sigma2_0 > 0:
            raise DomainError(f"sigma2_0 must be > 0, got {self.sigma2_0}")
        if not self.s0 > 0:
            raise DomainError(f"s0 must be > 0, got {self.s0}")
        if self.t_m < 0:
            raise DomainError(f"t_m must be >= 0, got {self.t_m}")

    @classmethod
    def from_mapping(cls, values: dict) -> "NgarchParams":
        """Build from box-style names (annual ``r``)."""
        v = dict(values)
        return cls(r=v["r"] / DAYS_PER_YEAR, beta0=v["beta0"], beta1=v["beta1"],
                   beta2=v["beta2"], lambda_theta=v["lambda_theta"],
                   sigma2_0=v["sigma2_0"], s0=v.get("s0", 1.0),
                   t_m=int(round(v.get("t_m", 0))))


@dataclass(frozen=True)
class HestonParams:
    """Heston parameters with an annual rate."""

    r: float
    kappa: float
    theta_star: float
    sigma_star: float
    v0: float
    rho: float

    def __post_init__(self):
        for name in ("kappa", "theta_star", "sigma_star", "v0"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not -1.0 <= self.rho <= 1.0:
            raise DomainError(f"rho must lie in [-1, 1], got {self.rho}")


@dataclass(frozen=True)
class McConfig:
    paths: int = 100_000
    seed: int = 0
    antithetic: bool = True

    def __post_init__(self):
        if self.paths < 1 or (self.antithetic and self.paths < 2):
            raise ValueError(f"need paths >= {2 if self.antithetic else 1}, got {self.paths}")


@dataclass(frozen=True)
class McResult:
    price: float
    std_error: float


def _normals(rng, cfg: McConfig, size_extra=()):
    """One day's shocks, antithetic pairs stacked as ``[z, -z]``."""
    if cfg.antithetic:
        z = rng.standard_normal((cfg.paths // 2,) + size_extra)
        return np.concatenate([z, -z])
    return rng.standard_normal((cfg.paths,) + size_extra)


def _summarize(payoff, discount, cfg):
    if cfg.antithetic:
        half = payoff.size // 2
        payoff = 0.5 * (payoff[:half] + payoff[half:])
    mean = float(np.mean(payoff))
    se = float(np.std(payoff, ddof=1) / np.sqrt(payoff.size)) if payoff.size > 1 else 0.0
    return McResult(float(discount * mean), float(discount * se))


def ngarch_log_growth(p: NgarchParams, cfg: McConfig) -> np.ndarray:
    """Simulated ``log(S_T / S_0)`` for every path.

    Day ``t`` return is ``r - sigma2_t / 2 + sqrt(sigma2_t) z_t`` with the
    first day's variance equal to ``sigma2_0``; afterwards
    ``sigma2_{t+1} = beta0 + beta1 sigma2_t + beta2 sigma2_t (z_t - lambda_theta)^2``.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.paths - (cfg.paths % 2 if cfg.antithetic else 0)
    logs = np.zeros(n)
    var = np.full(n, p.sigma2_0)
    # overflow shows up as inf/nan and is reported below with the day
    with np.errstate(over="ignore", invalid="ignore"):
        for day in range(int(p.t_m)):
            z = _normals(rng, cfg)
            logs += p.r - 0.5 * var + np.sqrt(var) * z
            var = p.beta0 + var * (p.beta1 + p.beta2 * (z - p.lambda_theta) ** 2)
            if not np.all(np.isfinite(logs)):
                raise SimulationError(f"non-finite NGARCH path value at day {day + 1}")
    return logs


def ngarch_price(p: NgarchParams, strike: float = 1.0, cfg: McConfig = McConfig()) -> McResult:
    """Monte Carlo European call price under NGARCH(1,1)."""
    if not strike > 0:
        raise DomainError(f"strike must be > 0, got {strike}")
    if p.t_m == 0:
        return McResult(max(p.s0 - strike, 0.0), 0.0)
    growth = np.exp(ngarch_log_growth(p, cfg))
    payoff = np.maximum(p.s0 * growth - strike, 0.0)
    return _summarize(payoff, np.exp(-p.r * p.t_m), cfg)


def ngarch_price_homogeneity_check(p: NgarchParams, strike: float, c: float,
                                   cfg: McConfig = McConfig(), rtol: float = 1e-12) -> None:
    """Assert ``price(c s0, c K) == c price(s0, K)`` under common random numbers."""
    if not c > 0:
        raise DomainError(f"scale must be > 0, got {c}")
    base = ngarch_price(p, strike, cfg).price
    scaled = ngarch_price(replace(p, s0=c * p.s0), c * strike, cfg).price
    assert abs(scaled - c * base) <= rtol * max(abs(c * base), 1e-300), (scaled, c * base)


def heston_terminal(p: HestonParams, maturities_days: Sequence[int], cfg: McConfig) -> np.ndarray:
    """Simulated ``S_T / S_0`` at each requested maturity, shape ``(len(maturities), paths)``.

    ``z1`` drives the stock; the variance shock is ``rho z1 + sqrt(1-rho^2) z_perp``,
    so with ``sigma_star = 0`` the paths do not depend on ``rho``.
    """
    mats = np.asarray(maturities_days, dtype=int).reshape(-1)
    if np.any(mats < 0):
        raise DomainError("maturities must be >= 0")
    dt = 1.0 / DAYS_PER_YEAR
    sq_dt = np.sqrt(dt)
    rho_perp = np.sqrt(max(0.0, 1.0 - p.rho * p.rho))
    rng = np.random.default_rng(cfg.seed)
    n = cfg.paths - (cfg.paths % 2 if cfg.antithetic else 0)
    logs = np.zeros(n)
    v = np.full(n, float(p.v0))
    out = np.empty((mats.size, n))
    horizon = int(mats.max()) if mats.size else 0
    for k in np.flatnonzero(mats == 0):
        out[k] = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        for day in range(1, horizon + 1):
            z = _normals(rng, cfg, (2,))
            z1, z2 = z[:, 0], p.rho * z[:, 0] + rho_perp * z[:, 1]
            vp = np.maximum(v, 0.0)
            logs += (p.r - 0.5 * vp) * dt + np.sqrt(vp) * sq_dt * z1
            v = v + p.kappa * (p.theta_star - vp) * dt + p.sigma_star * np.sqrt(vp) * sq_dt * z2
            if not (np.all(np.isfinite(logs)) and np.all(np.isfinite(v))):
                raise SimulationError(f"non-finite Heston path value at day {day}")
            for k in np.flatnonzero(mats == day):
                out[k] = np.exp(logs)
    return out


def heston_price(p: HestonParams, s0, strike: float, maturity_days: int,
                 cfg: McConfig = McConfig()) -> McResult:
    """Monte Carlo European call under Heston (full-truncation Euler, daily steps).

    ``s0`` may be an array; then ``price`` and ``std_error`` are arrays
    computed from the same paths.
    """
    s0 = np.asarray(s0, dtype=np.float64)
    if maturity_days == 0:
        intrinsic = np.maximum(s0 - strike, 0.0)
        return McResult(intrinsic if s0.ndim else float(intrinsic),
                        np.zeros_like(s0) if s0.ndim else 0.0)
    growth = heston_terminal(p, [maturity_days], cfg)[0]
    disc = np.exp(-p.r * maturity_days / DAYS_PER_YEAR)
    if s0.ndim == 0:
        return _summarize(np.maximum(float(s0) * growth - strike, 0.0), disc, cfg)
    res = [_summarize(np.maximum(s * growth - strike, 0.0), disc, cfg) for s in s0]
    return McResult(np.array([r.price for r in res]), np.array([r.std_error for r in res]))


def lognormal_call(s0, strike, rate_total, variance_total):
    """Black-Scholes call with total (not annualized) rate and variance.

    Broadcasts over array arguments. Zero variance gives the discounted
    intrinsic value on the forward, ``max(s0 - K e^{-rate_total}, 0)``.
    """
    s0, strike, rt, var = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64)
                                                for a in (s0, strike, rate_total, variance_total)))
    if np.any(var < 0):
        raise DomainError("variance_total must be >= 0")
    disc_k = strike * np.exp(-rt)
    sd = np.sqrt(var)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(s0 / disc_k) + 0.5 * var) / sd
        price = s0 * ndtr(d1) - disc_k * ndtr(d1 - sd)
    price = np.where(sd > 0, price, np.maximum(s0 - disc_k, 0.0))
    return float(price) if price.ndim == 0 else price


def ngarch_expected_variance(beta0, beta1, beta2, lambda_theta, sigma2_0, t_m):
    """Sum over ``t_m`` days of the expected NGARCH daily variance.

    Uses ``E[sigma2_{t+1}] = beta0 + phi E[sigma2_t]`` with
    ``phi = beta1 + beta2 (1 + lambda_theta^2)``. Fractional ``t_m`` is
    handled by the same closed form.
    """
    b0, b1, b2, lt, h0, t = np.broadcast_arrays(
        *(np.asarray(a, dtype=np.float64) for a in (beta0, beta1, beta2, lambda_theta, sigma2_0, t_m)))
    phi = b1 + b2 * (1.0 + lt * lt)
    one_minus = 1.0 - phi
    small = np.abs(one_minus) < 1e-8
    safe = np.where(small, 1.0, one_minus)
    geo = np.where(small, t * (1.0 - 0.5 * (t - 1.0) * one_minus),
                   (1.0 - phi ** t) / safe)  # sum_{k<t} phi^k
    # sum_{k<t} sum_{i<k} phi^i = (t - geo) / (1 - phi)
    geo2 = np.where(small, 0.5 * t * (t - 1.0), (t - geo) / safe)
    return h0 * geo + b0 * geo2


def ngarch_lognormal_proxy(values: dict):
    """Lognormal call price with NGARCH expected integrated variance.

    ``values`` maps box names (annual ``r``, ``t_m`` in days) to scalars or
    arrays. Smooth in every argument, cheap, and deterministic.
    """
    v = {k: np.asarray(x, dtype=np.float64) for k, x in values.items()}
    t = v["t_m"]
    var = ngarch_expected_variance(v["beta0"], v["beta1"], v["beta2"], v["lambda_theta"],
                                   v["sigma2_0"], t)
    return lognormal_call(v["s0"], 1.0, v["r"] / DAYS_PER_YEAR * t, np.maximum(var, 0.0))


def node_seed(base_seed: int, point) -> int:
    """Seed derived from a node's coordinates, independent of evaluation order."""
    h = hashlib.blake2b(np.asarray(point, dtype=np.float64).tobytes(), digest_size=8,
                        key=int(base_seed).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def ngarch_oracle(variables: Sequence[str], fixed: dict, cfg: McConfig,
                  per_node_seed: bool = False) -> Callable:
    """Scalar oracle ``point -> price`` over the named NGARCH variables.

    By default every node reuses ``cfg.seed`` (common random numbers), which
    keeps the sampled price surface smooth in the parameters. With
    ``per_node_seed`` the seed is hashed from the node coordinates.
    """
    variables = list(variables)

    def oracle(point):
        vals = dict(fixed)
        vals.update(zip(variables, np.asarray(point, dtype=np.float64).tolist()))
        seed = node_seed(cfg.seed, point) if per_node_seed else cfg.seed
        t = vals["t_m"]
        whole = int(np.floor(t))
        frac = t - whole
        price = ngarch_price(NgarchParams.from_mapping({**vals, "t_m": whole}), 1.0,
                             replace(cfg, seed=seed)).price
        if frac > 0:
            # linear in maturity between whole days
            nxt = ngarch_price(NgarchParams.from_mapping({**vals, "t_m": whole + 1}), 1.0,
                               replace(cfg, seed=seed)).price
            price = (1 - frac) * price + frac * nxt
        return price

    return oracle


def heston_oracle(variables: Sequence[str], fixed: dict, cfg: McConfig) -> Callable:
    """Scalar oracle over Heston variables (``s0``, ``t_m``, ``r``, SV parameters), K = 1."""
    variables = list(variables)

    def oracle(point):
        vals = dict(fixed)
        vals.update(zip(variables, np.asarray(point, dtype=np.float64).tolist()))
        hp = HestonParams(r=vals["r"], kappa=vals["kappa"], theta_star=vals["theta_star"],
                          sigma_star=vals["sigma_star"], v0=vals["v0"], rho=vals["rho"])
        return heston_price(hp, vals["s0"], 1.0, int(round(vals["t_m"])), cfg).price

    return oracle


def lognormal_oracle(variables: Sequence[str], fixed: dict) -> Callable:
    """Vectorized proxy oracle ``(m, n) -> m`` prices over NGARCH variable names."""
    variables = list(variables)

    def oracle(points):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        vals = {k: np.full(len(pts), v) for k, v in fixed.items()}
        vals.update({name: pts[:, j] for j, name in enumerate(variables)})
        return ngarch_lognormal_proxy(vals)

    return oracle


def make_quote_grid(model: Callable, spots, maturities, strike: float = 1.0,
                    rate: float = 0.05):
    """Price every (spot, maturity) pair and package the result as quotes.

    ``model(spots, maturity_days)`` returns prices for an array of spots at
    one maturity (strike ``strike``, annual rate ``rate``); this keeps one
    Monte Carlo simulation per maturity.
    """
    from .quotes import QuoteSet

    spots = np.asarray(spots, dtype=np.float64).reshape(-1)
    mats = np.asarray(maturities, dtype=np.float64).reshape(-1)
    if spots.size == 0 or mats.size == 0:
        raise ValueError("spots and maturities must be non-empty")
    prices = np.empty((spots.size, mats.size))
    for k, t in enumerate(mats):
        prices[:, k] = np.asarray(model(spots, t), dtype=np.float64).reshape(-1)
    s, t = np.meshgrid(spots, mats, indexing="ij")
    return QuoteSet(spot=s.ravel(), strike=np.full(s.size, float(strike)),
                    maturity_days=t.ravel(), rate_annual=np.full(s.size, float(rate)),
                    price=prices.ravel())
