"""Degree-doubling convergence study.

Builds the interpolant of one oracle at several uniform degrees and
records storage, build and evaluation time, and the error against the
oracle on an interior control grid.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .interpolant import Domain, build, control_grid

BENCH_COLUMNS = ("degree", "storage_bytes", "build_seconds", "eval_seconds",
                 "control_mse", "control_max_err")


@dataclass(frozen=True)
class BenchRow:
    degree: int
    storage_bytes: int
    build_seconds: float
    eval_seconds: float
    control_mse: float
    control_max_err: float

    def as_tuple(self):
        return tuple(getattr(self, c) for c in BENCH_COLUMNS)


def convergence_study(oracle: Callable, domain: Domain, degrees: Sequence[int] = (3, 6, 12),
                      control_m: int = 7, vectorized: bool = False,
                      threads: int = 1) -> list:
    """Build at each uniform degree and score on ``control_grid(domain, control_m)``.

    The oracle is evaluated once on the control grid as the reference.
    """
    grid = control_grid(domain, control_m)
    pts = grid.points()
    if vectorized:
        ref = np.asarray(oracle(pts), dtype=np.float64)
    else:
        ref = np.array([oracle(x) for x in pts], dtype=np.float64)
    ref = ref.reshape(grid.shape)
    rows = []
    for N in degrees:
        t0 = time.perf_counter()
        p = build(oracle, domain, [N] * domain.ndim, vectorized=vectorized, threads=threads)
        t1 = time.perf_counter()
        approx = p.eval_grid(grid)
        t2 = time.perf_counter()
        err = approx - ref
        rows.append(BenchRow(int(N), p.nbytes, t1 - t0, t2 - t1,
                             float(np.mean(err * err)), float(np.max(np.abs(err)))))
    return rows


def loglog_slope(rows) -> float:
    """Least-squares slope of log(control MSE) against log(storage)."""
    x = np.log([r.storage_bytes for r in rows])
    y = np.log([max(r.control_mse, np.finfo(float).tiny) for r in rows])
    return float(np.polyfit(x, y, 1)[0])
