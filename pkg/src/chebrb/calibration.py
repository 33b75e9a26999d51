"""Least-squares calibration of NGARCH parameters against option quotes.

A *pricer* is any object with ``prices(params, quotes) -> ndarray`` where
``params`` maps the five free parameter names to values. Two backends are
provided: :class:`PolynomialPricer` (full or reduced polynomial) and
:class:`MonteCarloPricer` (direct simulation, slow, for reference).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import DomainError
from .interpolant import Domain, Interpolant
from .models import (DAYS_PER_YEAR, FREE_PARAMETERS, NGARCH_BOX, McConfig, NgarchParams,
                     ngarch_log_growth)
from .quotes import QuoteSet

log = logging.getLogger(__name__)

QUOTE_VARIABLES = ("s0", "t_m", "r")


class PolynomialPricer:
    """Price quotes with a polynomial over named NGARCH variables.

    Each quote is mapped to strike-1 coordinates (``s0 = spot / strike``)
    and the polynomial value is scaled back by the strike. Variables the
    polynomial does not cover are whatever it was built with; in particular
    quote rates are ignored when ``"r"`` is not among ``variables``.
    Polynomial values below zero (interpolation ripple on deep
    out-of-the-money quotes) are floored at zero unless ``floor=False``.
    """

    def __init__(self, poly, variables: Sequence[str], floor: bool = True):
        variables = list(variables)
        if len(variables) != poly.ndim:
            raise ValueError(f"{len(variables)} variable names for a {poly.ndim}-d polynomial")
        unknown = set(variables) - set(FREE_PARAMETERS) - set(QUOTE_VARIABLES)
        if unknown:
            raise ValueError(f"unknown variables {sorted(unknown)}")
        self.poly = poly
        self.variables = variables
        self.floor = floor

    def _check(self, j, values):
        lo, hi = self.poly.domain.lower[j], self.poly.domain.upper[j]
        v = np.asarray(values)
        slack = 1e-12 * max(1.0, abs(lo), abs(hi))
        bad = (v < lo - slack) | (v > hi + slack)
        if np.any(bad):
            raise DomainError(f"{self.variables[j]}={float(v[bad].flat[0])!r} "
                              f"outside [{lo}, {hi}]")

    def prices(self, params: dict, quotes: QuoteSet) -> np.ndarray:
        qcols = {"s0": quotes.spot / quotes.strike, "t_m": quotes.maturity_days,
                 "r": quotes.rate_annual}
        fixed, free = {}, []
        for j, name in enumerate(self.variables):
            if name in qcols:
                self._check(j, qcols[name])
                free.append(j)
            else:
                self._check(j, params[name])
                fixed[j] = float(params[name])
        pts = np.column_stack([qcols[self.variables[j]] for j in free])
        if isinstance(self.poly, Interpolant) and fixed and free:
            vals = self.poly.partial(fixed).eval_points(pts)
        else:
            full = np.empty((len(quotes), self.poly.ndim))
            for j, v in fixed.items():
                full[:, j] = v
            for k, j in enumerate(free):
                full[:, j] = pts[:, k]
            vals = self.poly.eval_points(full)
        if self.floor:
            vals = np.maximum(vals, 0.0)
        return quotes.strike * vals


class MonteCarloPricer:
    """Direct NGARCH simulation; one run per distinct (maturity, rate)."""

    def __init__(self, cfg: McConfig = McConfig()):
        self.cfg = cfg

    def prices(self, params: dict, quotes: QuoteSet) -> np.ndarray:
        out = np.empty(len(quotes))
        keys = np.column_stack([quotes.maturity_days, quotes.rate_annual])
        for key in np.unique(keys, axis=0):
            sel = np.all(keys == key, axis=1)
            t, r = int(round(key[0])), key[1] / DAYS_PER_YEAR
            m = quotes.spot[sel] / quotes.strike[sel]
            if t == 0:
                out[sel] = quotes.strike[sel] * np.maximum(m - 1.0, 0.0)
                continue
            p = NgarchParams(r=r, t_m=t, **{k: params[k] for k in FREE_PARAMETERS})
            growth = np.exp(ngarch_log_growth(p, self.cfg))
            payoff = np.maximum(m[:, None] * growth[None, :] - 1.0, 0.0).mean(axis=1)
            out[sel] = quotes.strike[sel] * np.exp(-r * t) * payoff
        return out


def in_mse(params: dict, quotes: QuoteSet, pricer) -> float:
    """Mean squared pricing error over the quote set."""
    d = quotes.price - pricer.prices(params, quotes)
    return float(np.mean(d * d))


def predict_and_score(params: dict, new_quotes: QuoteSet, pricer) -> dict:
    """Max and mean absolute error of model prices against ``new_quotes``."""
    err = np.abs(new_quotes.price - pricer.prices(params, new_quotes))
    return {"max_abs_err": float(err.max()), "mean_abs_err": float(err.mean())}


@dataclass(frozen=True)
class CalibrationOptions:
    starts: int = 5
    seed: int = 0
    method: str = "nelder-mead"  # or "gradient"
    maxiter: int = 4000
    xatol: float = 1e-10
    fatol: float = 1e-18
    fd_step: float = 1e-6
    threads: int = 1


@dataclass(frozen=True)
class CalibrationResult:
    params: dict
    in_mse: float
    iterations: int
    converged: bool
    grad_norm: float = float("nan")
    start_values: tuple = field(default=(), repr=False)


def default_box(names: Sequence[str] = FREE_PARAMETERS) -> Domain:
    return Domain.from_bounds([NGARCH_BOX[k] for k in names])


def fd_gradient(f, u, h: float = 1e-6) -> np.ndarray:
    """Forward differences in ``[-1, 1]^d``, backward where ``u + h`` leaves the box."""
    u = np.asarray(u, dtype=np.float64)
    f0 = f(u)
    g = np.empty_like(u)
    for i in range(u.size):
        step = h if u[i] + h <= 1.0 else -h
        e = u.copy()
        e[i] += step
        g[i] = (f(e) - f0) / step
    return g


def _projected_gradient(f, u0, opts):
    u = np.clip(u0, -1, 1)
    fu = f(u)
    step = 1.0
    it = 0
    for it in range(1, opts.maxiter + 1):
        g = fd_gradient(f, u, opts.fd_step)
        if not np.any(g):
            break
        while step > 1e-14:
            cand = np.clip(u - step * g, -1, 1)
            fc = f(cand)
            if fc <= fu - 1e-4 * np.dot(g, u - cand):
                break
            step *= 0.5
        else:
            break
        moved = np.max(np.abs(cand - u))
        u, fu = cand, fc
        step *= 2.0
        if moved < opts.xatol:
            break
    return u, fu, it, True


def calibrate(quotes: QuoteSet, pricer, box: Optional[Domain] = None,
              opts: CalibrationOptions = CalibrationOptions(),
              fixed: Optional[dict] = None) -> CalibrationResult:
    """Minimize in-sample MSE over the free NGARCH parameters.

    Parameters named in ``fixed`` are held at the given values; ``box``
    covers the remaining ones in ``FREE_PARAMETERS`` order (default: the
    standard parameter box). The search runs in box-normalized coordinates
    ``[-1, 1]^d``: bounded Nelder-Mead (the simplex is clipped to the box)
    from ``opts.starts`` scrambled-Halton interior points, best result kept.
    """
    fixed = dict(fixed or {})
    unknown = sorted(set(fixed) - set(FREE_PARAMETERS))
    if unknown:
        raise ValueError(f"unknown fixed parameters {unknown}")
    names = [k for k in FREE_PARAMETERS if k not in fixed]
    if not names:
        raise ValueError("nothing to calibrate: every parameter is fixed")
    box = box if box is not None else default_box(names)
    if box.ndim != len(names):
        raise ValueError(f"box must have {len(names)} dimensions")

    def to_params(u):
        x = box.from_reference(np.clip(u, -1.0, 1.0))
        return {**fixed, **dict(zip(names, x.tolist()))}

    def objective(u):
        return in_mse(to_params(u), quotes, pricer)

    starts = 0.8 * (2.0 * qmc.Halton(d=box.ndim, scramble=True, seed=opts.seed)
                    .random(opts.starts) - 1.0)

    def run(u0):
        if opts.method == "gradient":
            return _projected_gradient(objective, u0, opts)
        res = minimize(objective, u0, method="Nelder-Mead", bounds=[(-1.0, 1.0)] * box.ndim,
                       options={"maxiter": opts.maxiter, "maxfev": 4 * opts.maxiter,
                                "xatol": opts.xatol, "fatol": opts.fatol, "adaptive": True})
        return res.x, float(res.fun), int(res.nit), bool(res.success)

    if opts.threads > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            runs = list(pool.map(run, starts))
    else:
        runs = [run(u0) for u0 in starts]
    start_vals = tuple(objective(u0) for u0 in starts)

    best = min(range(len(runs)), key=lambda i: runs[i][1])
    u, fu, _, ok = runs[best]
    u = np.clip(u, -1.0, 1.0)
    iterations = sum(r[2] for r in runs)
    improved = fu < min(start_vals)
    if not fu <= min(start_vals):
        u, fu = starts[int(np.argmin(start_vals))], min(start_vals)
    grad = fd_gradient(objective, u, opts.fd_step)
    log.info("calibration: in_mse=%g after %d iterations", fu, iterations)
    return CalibrationResult(params=to_params(u), in_mse=float(fu), iterations=iterations,
                             converged=bool(improved and ok),
                             grad_norm=float(np.linalg.norm(grad)), start_values=start_vals)
