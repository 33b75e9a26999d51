"""
Calibrating to quotes from another model
========================================

Option quotes are simulated under Heston dynamics. A polynomial of the
NGARCH-style pricing surface over five model parameters plus moneyness
and maturity is then fitted to them, first with the full coefficient
tensor and then with its compressed form. The fitted parameters are
used to predict a second, shifted grid of quotes.

Takes about a minute; the reduced-form fit is the slow part.
"""

import time

import numpy as np

from chebrb import Domain, TruncationSpec, build, compress
from chebrb.calibration import PolynomialPricer, calibrate, predict_and_score
from chebrb.models import HestonParams, McConfig, heston_price, lognormal_oracle, make_quote_grid

names = ["sigma2_0", "beta0", "beta1", "beta2", "lambda_theta", "s0", "t_m"]
bounds = [(0.25e-4, 2.25e-4), (0, 2e-6), (0.8, 0.9), (0.02, 0.05), (0.2, 1.0),
          (0.75, 1.2), (5, 365)]
p = build(lognormal_oracle(names, {"r": 0.05}), Domain.from_bounds(bounds),
          [3, 3, 3, 3, 3, 12, 10], vectorized=True)
q = compress(p, TruncationSpec(1e-9))
print(f"polynomial: {p.nbytes} bytes full, {q.nbytes} reduced, retained {q.retained}")

hp = HestonParams(r=0.05, kappa=2.0, theta_star=0.04, sigma_star=0.3, v0=0.04, rho=-0.5)
cfg = McConfig(paths=20_000, seed=1)
heston = lambda s, t: heston_price(hp, s, 1.0, int(t), cfg).price
q_in = make_quote_grid(heston, np.arange(0.80, 1.1801, 0.02), np.arange(10, 341, 30))
q_out = make_quote_grid(heston, np.arange(0.79, 1.1701, 0.02), np.arange(25, 326, 30))
print(f"{len(q_in)} fitting quotes, {len(q_out)} prediction quotes")

box = Domain.from_bounds(bounds[:5])
for label, poly in (("full", p), ("reduced", q)):
    pricer = PolynomialPricer(poly, names)
    t0 = time.perf_counter()
    res = calibrate(q_in, pricer, box)
    wall = time.perf_counter() - t0
    ins = predict_and_score(res.params, q_in, pricer)
    out = predict_and_score(res.params, q_out, pricer)
    print(f"\n{label}: {wall:.1f} s, in-sample MSE {res.in_mse:.3e}, converged {res.converged}")
    print("  params:", {k: float(f"{v:.4g}") for k, v in res.params.items()})
    print(f"  mean abs error in {ins['mean_abs_err']:.2e}, out {out['mean_abs_err']:.2e}")
