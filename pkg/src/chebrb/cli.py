"""``chebrb`` command line: build, compress, eval, calibrate, bench.

Each polynomial file ``poly.chrb`` is accompanied by ``poly.chrb.json``
recording the model, variable names and fixed values it was built with;
``eval`` uses it for column names and ``calibrate`` needs it to map
variables onto quotes and parameters.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import container
from .bench import BENCH_COLUMNS, convergence_study, loglog_slope
from .calibration import CalibrationOptions, PolynomialPricer, calibrate
from .errors import DomainError, OracleError, SimulationError, ToleranceError
from .interpolant import Domain, Interpolant, ProductGrid, build
from .models import (FREE_PARAMETERS, HESTON_BOX, HESTON_DEFAULTS, NGARCH_BOX,
                     NGARCH_DEFAULTS, McConfig, heston_oracle, lognormal_oracle, ngarch_oracle)
from .quotes import read_quotes_csv
from .reduced_basis import TruncationSpec, compress, storage_report

log = logging.getLogger("chebrb")

DEFAULT_MAX_BYTES = 1 << 30
MODELS = ("ngarch", "heston", "lognormal")
BOXES = {"ngarch": NGARCH_BOX, "lognormal": NGARCH_BOX, "heston": HESTON_BOX}
DEFAULTS = {"ngarch": NGARCH_DEFAULTS, "lognormal": NGARCH_DEFAULTS, "heston": HESTON_DEFAULTS}
BUILD_KEYS = ("model", "vars", "degrees", "bounds", "fixed", "paths", "seed", "split",
              "threads", "out", "max_bytes")


class CliError(Exception):
    """User-facing failure; printed without a traceback, exit status 2."""


# --------------------------------------------------------------------------
# argument helpers

def _floats(text: str, what: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"{what}: cannot parse {text!r}") from exc


def parse_bounds(text: str, n: int) -> list:
    """``"a:b,c:d,..."`` -> list of ``(a, b)``."""
    out = []
    for part in text.split(","):
        try:
            lo, hi = (float(v) for v in part.split(":"))
        except ValueError as exc:
            raise CliError(f"--bounds: expected lo:hi, got {part!r}") from exc
        out.append((lo, hi))
    if len(out) != n:
        raise CliError(f"--bounds: {len(out)} ranges for {n} variables")
    return out


def parse_fixed(text: str) -> dict:
    """``"name=value,..."`` -> dict."""
    out = {}
    if not text:
        return out
    for part in text.split(","):
        if "=" not in part:
            raise CliError(f"--fixed: expected name=value, got {part!r}")
        k, v = part.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError as exc:
            raise CliError(f"--fixed: bad value for {k.strip()}: {v!r}") from exc
    return out


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def _read_sidecar(path) -> dict:
    p = sidecar_path(path)
    if not p.exists():
        return {}
    with open(p) as fh:
        return json.load(fh)


def _write_sidecar(path, meta: dict) -> None:
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _save(poly, path) -> int:
    try:
        return container.save(poly, path)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}") from exc


def _load(path):
    try:
        return container.read(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from exc
    except container.ContainerError as exc:
        raise CliError(f"{path}: {exc}") from exc


# --------------------------------------------------------------------------
# build

def _apply_config(args) -> None:
    """Merge a JSON config file into ``args``; flags given explicitly win."""
    if not args.config:
        return
    with open(args.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise CliError(f"{args.config}: expected a JSON object")
    unknown = sorted(set(cfg) - set(BUILD_KEYS))
    if unknown:
        raise CliError(f"{args.config}: invalid config keys: {', '.join(unknown)}")
    for k, v in cfg.items():
        if getattr(args, k, None) is None:
            if k == "fixed" and isinstance(v, dict):
                v = ",".join(f"{a}={b}" for a, b in v.items())
            elif k in ("vars", "degrees") and isinstance(v, list):
                v = ",".join(str(x) for x in v)
            elif k == "bounds" and isinstance(v, list):
                v = ",".join(f"{a}:{b}" for a, b in v)
            setattr(args, k, v)


def _build_setup(args):
    """Resolve model, variables, domain, fixed values and oracle from ``args``."""
    model = args.model or "lognormal"
    if model not in MODELS:
        raise CliError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
    box = BOXES[model]
    names = [v.strip() for v in (args.vars or "").split(",") if v.strip()]
    if not names:
        raise CliError("--vars is required")
    bad = [v for v in names if v not in box]
    if bad:
        raise CliError(f"unknown variables for {model}: {', '.join(bad)}")
    if len(set(names)) != len(names):
        raise CliError("--vars lists a variable twice")
    if args.degrees is None:
        raise CliError("--degrees is required")
    degrees = [int(d) for d in _floats(str(args.degrees), "--degrees")]
    if len(degrees) == 1:
        degrees = degrees * len(names)
    if len(degrees) != len(names):
        raise CliError(f"--degrees: {len(degrees)} degrees for {len(names)} variables")
    bounds = (parse_bounds(args.bounds, len(names)) if args.bounds
              else [box[v] for v in names])
    fixed = parse_fixed(args.fixed or "")
    bad = sorted(set(fixed) - set(box))
    if bad:
        raise CliError(f"unknown fixed values for {model}: {', '.join(bad)}")
    clash = sorted(set(fixed) & set(names))
    if clash:
        raise CliError(f"variables also given as fixed: {', '.join(clash)}")
    for k in box:
        if k not in names and k not in fixed:
            fixed[k] = DEFAULTS[model][k]
    try:
        domain = Domain.from_bounds(bounds)
    except DomainError as exc:
        raise CliError(f"--bounds: {exc}") from exc
    cfg = McConfig(paths=int(args.paths if args.paths is not None else 400_000),
                   seed=int(args.seed if args.seed is not None else 0))
    if model == "ngarch":
        oracle, vec = ngarch_oracle(names, fixed, cfg), False
    elif model == "heston":
        oracle, vec = heston_oracle(names, fixed, cfg), False
    else:
        oracle, vec = lognormal_oracle(names, fixed), True
    meta = {"model": model, "variables": names, "fixed": fixed, "degrees": degrees,
            "bounds": [list(b) for b in bounds], "paths": cfg.paths, "seed": cfg.seed}
    return oracle, vec, domain, degrees, meta


def cmd_build(args) -> int:
    _apply_config(args)
    if not args.out:
        raise CliError("--out is required")
    oracle, vec, domain, degrees, meta = _build_setup(args)
    count = math.prod(N + 1 for N in degrees)
    size = 8 * count
    max_bytes = int(args.max_bytes) if args.max_bytes is not None else DEFAULT_MAX_BYTES
    split_axis = args.split
    if size > max_bytes and split_axis is None:
        raise CliError(f"coefficient tensor needs {size} bytes (> {max_bytes}); "
                       f"rerun with --split to build it slice by slice")
    if split_axis is not None and not 0 <= split_axis < len(degrees):
        raise CliError(f"--split axis {split_axis} out of range for {len(degrees)} variables")
    # fail on an unwritable path before spending time on the oracle
    try:
        open(args.out, "ab").close()
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc.strerror}") from exc
    calls = [0]

    def counted(x):
        calls[0] += len(x) if vec else 1
        return oracle(x)

    t0 = time.perf_counter()
    try:
        p = build(counted, domain, degrees, vectorized=vec, threads=int(args.threads or 1),
                  split_axis=split_axis)
    except (OracleError, SimulationError) as exc:
        raise CliError(f"oracle failed: {exc}") from exc
    wall = time.perf_counter() - t0
    nbytes = _save(p, args.out)
    meta["kind"] = "split" if p.is_split else "full"
    _write_sidecar(args.out, meta)
    print(f"nodes: {count}")
    print(f"oracle_calls: {calls[0]}")
    print(f"wall_seconds: {wall:.3f}")
    print(f"bytes: {nbytes}")
    return 0


# --------------------------------------------------------------------------
# compress

def cmd_compress(args) -> int:
    p = _load(args.input)
    if not isinstance(p, Interpolant):
        raise CliError(f"{args.input}: expected a full or split interpolant, got a reduced one")
    if not float(args.epsilon) > 0:
        raise CliError(f"--epsilon must be positive, got {args.epsilon}")
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            q = compress(p, TruncationSpec(float(args.epsilon)), below_floor="raise")
    except ToleranceError as exc:
        raise CliError(f"epsilon {args.epsilon} is below the achievable floor "
                       f"{exc.floor:.3e}") from None
    for w in caught:
        print(f"note: {w.message}", file=sys.stderr)
    wall = time.perf_counter() - t0
    _save(q, args.out)
    meta = _read_sidecar(args.input)
    if meta:
        meta.update(kind="reduced", epsilon=float(args.epsilon))
        _write_sidecar(args.out, meta)
    rep = storage_report(q)
    print(f"retained: {','.join(str(m) for m in q.retained)}")
    print(f"full_bytes: {rep['full_bytes']}")
    print(f"reduced_bytes: {rep['reduced_bytes']}")
    print(f"savings: {100.0 * rep['savings_fraction']:.3f}%")
    print(f"mse_phi: {q.mse:.6e}")
    print(f"wall_seconds: {wall:.3f}")
    return 0


# --------------------------------------------------------------------------
# eval

def read_grid_csv(path, names):
    """Parse a grid CSV.

    Product form: first cell ``dim``; every following row is
    ``<dimension>,v1,v2,...`` with the dimension given by index or variable
    name. Otherwise a header row followed by one point per row.

    Returns ``("product", ProductGrid)`` or ``("points", ndarray)``.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise CliError(f"{path}: empty grid file")
    n = len(names)
    if rows[0][0].strip().lower() == "dim":
        axes = [None] * n
        for lineno, row in enumerate(rows[1:], start=2):
            key = row[0].strip()
            j = names.index(key) if key in names else None
            if j is None:
                try:
                    j = int(key)
                except ValueError:
                    raise CliError(f"{path}: row {lineno}: unknown dimension {key!r}") from None
            if not 0 <= j < n:
                raise CliError(f"{path}: row {lineno}: dimension {j} out of range")
            if axes[j] is not None:
                raise CliError(f"{path}: row {lineno}: dimension {key!r} given twice")
            try:
                vals = [float(c) for c in row[1:] if c.strip()]
            except ValueError:
                raise CliError(f"{path}: row {lineno}: non-numeric value") from None
            if not vals:
                raise CliError(f"{path}: row {lineno}: no values")
            axes[j] = np.array(vals)
        missing = [names[j] for j, a in enumerate(axes) if a is None]
        if missing:
            raise CliError(f"{path}: no values for {', '.join(missing)}")
        return "product", ProductGrid(tuple(axes))
    header = [c.strip() for c in rows[0]]
    if len(header) != n:
        raise CliError(f"{path}: header has {len(header)} columns, polynomial has {n} variables")
    if all(h in names for h in header):
        order = [header.index(v) for v in names]
    else:
        order = list(range(n))
    pts = []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise CliError(f"{path}: row {lineno}: non-numeric value") from None
        if len(vals) != n:
            raise CliError(f"{path}: row {lineno}: expected {n} values, got {len(vals)}")
        pts.append([vals[k] for k in order])
    if not pts:
        raise CliError(f"{path}: no points")
    return "points", np.array(pts)


def _check_domain(domain: Domain, names, columns) -> None:
    for j, v in enumerate(columns):
        v = np.asarray(v, dtype=np.float64)
        lo, hi = domain.lower[j], domain.upper[j]
        slack = 1e-12 * max(1.0, abs(lo), abs(hi))
        bad = (v < lo - slack) | (v > hi + slack) | ~np.isfinite(v)
        if np.any(bad):
            raise CliError(f"value {float(v[bad].flat[0])!r} for dimension {names[j]} "
                           f"is outside [{lo}, {hi}]")


def cmd_eval(args) -> int:
    p = _load(args.poly)
    meta = _read_sidecar(args.poly)
    names = meta.get("variables") or [f"x{j}" for j in range(p.ndim)]
    kind, grid = read_grid_csv(args.grid, names)
    t0 = time.perf_counter()
    if kind == "product":
        _check_domain(p.domain, names, grid.values)
        vals = p.eval_grid(grid).reshape(-1)
        pts = grid.points()
    else:
        pts = grid
        _check_domain(p.domain, names, pts.T)
        vals = p.eval_points(pts)
    wall = time.perf_counter() - t0
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(list(names) + ["price"])
        for x, v in zip(pts.tolist(), vals.tolist()):
            w.writerow([repr(c) for c in x] + [repr(v)])
    finally:
        if out is not sys.stdout:
            out.close()
    print(f"points: {len(vals)}", file=sys.stderr)
    print(f"eval_seconds: {wall:.6f}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# calibrate

def cmd_calibrate(args) -> int:
    p = _load(args.poly)
    meta = _read_sidecar(args.poly)
    names = meta.get("variables")
    if not names:
        raise CliError(f"{sidecar_path(args.poly)} is missing; cannot map variables")
    if meta.get("model", "ngarch") == "heston":
        raise CliError("calibration needs a polynomial over NGARCH variables")
    try:
        quotes = read_quotes_csv(args.quotes)
    except (ValueError, OSError) as exc:
        raise CliError(str(exc)) from exc
    fitted = [k for k in FREE_PARAMETERS if k in names]
    if not fitted:
        raise CliError("the polynomial has no NGARCH parameter among its variables")
    # parameters baked into the polynomial stay at their build values
    held = {k: float(v) for k, v in meta.get("fixed", {}).items()
            if k in FREE_PARAMETERS and k not in names}
    for k in FREE_PARAMETERS:
        if k not in names and k not in held:
            held[k] = NGARCH_DEFAULTS[k]
    js = [names.index(k) for k in fitted]
    box = Domain(p.domain.lower[js], p.domain.upper[js])
    pricer = PolynomialPricer(p, names)
    opts = CalibrationOptions(starts=int(args.starts), seed=int(args.seed),
                              method=args.method, threads=int(args.threads))
    t0 = time.perf_counter()
    try:
        res = calibrate(quotes, pricer, box, opts, fixed=held)
    except DomainError as exc:
        raise CliError(f"quotes outside the polynomial domain: {exc}") from exc
    wall = time.perf_counter() - t0
    result = {"params": res.params, "in_mse": res.in_mse, "iterations": res.iterations,
              "converged": res.converged, "grad_norm": res.grad_norm,
              "quotes": len(quotes), "wall_seconds": wall,
              "fitted": fitted}
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    print(f"wall_seconds: {wall:.3f}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# bench

def cmd_bench(args) -> int:
    if args.vars is None:
        args.vars = "s0,t_m,sigma2_0"
        if args.bounds is None:
            args.bounds = "0.75:1.2,30:365,0.25e-4:2.25e-4"
    args.degrees = "1"  # placeholder; the study sets its own degrees
    oracle, vec, domain, _, _ = _build_setup(args)
    degrees = [int(d) for d in _floats(args.levels, "--levels")]
    rows = convergence_study(oracle, domain, degrees, control_m=int(args.control),
                             vectorized=vec, threads=int(args.threads or 1))
    w = csv.writer(sys.stdout)
    w.writerow(BENCH_COLUMNS)
    for r in rows:
        w.writerow([r.degree, r.storage_bytes, f"{r.build_seconds:.6f}",
                    f"{r.eval_seconds:.6f}", repr(r.control_mse), repr(r.control_max_err)])
    if len(rows) >= 2:
        print(f"loglog_slope_mse_vs_storage: {loglog_slope(rows):.4f}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------

def _add_model_args(sp, bench: bool = False):
    sp.add_argument("--model", choices=MODELS, default=None if not bench else "lognormal")
    sp.add_argument("--vars", help="comma-separated variable names")
    sp.add_argument("--bounds", help="lo:hi per variable, comma-separated")
    sp.add_argument("--fixed", help="name=value for variables held constant")
    sp.add_argument("--paths", type=int, help="Monte Carlo paths (default 400000)")
    sp.add_argument("--seed", type=int, help="base seed (default 0)")
    sp.add_argument("--threads", type=int, help="worker threads (default 1)")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chebrb",
                                 description="Chebyshev interpolation and reduced-basis "
                                             "compression of option pricers.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="interpolate a pricing oracle")
    _add_model_args(b)
    b.add_argument("--degrees", help="degree per variable (or one for all)")
    b.add_argument("--split", type=int, nargs="?", const=0, default=None, metavar="AXIS",
                   help="write split form along AXIS (default 0)")
    b.add_argument("--max-bytes", type=int, default=None, dest="max_bytes",
                   help=f"size guard for the full tensor (default {DEFAULT_MAX_BYTES})")
    b.add_argument("--config", help="JSON file with any of: " + ", ".join(BUILD_KEYS))
    b.add_argument("--out")
    b.set_defaults(func=cmd_build)

    c = sub.add_parser("compress", help="hierarchical reduced-basis compression")
    c.add_argument("input")
    c.add_argument("--epsilon", type=float, required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compress)

    e = sub.add_parser("eval", help="evaluate a polynomial on a grid CSV")
    e.add_argument("poly")
    e.add_argument("grid")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    k = sub.add_parser("calibrate", help="fit NGARCH parameters to quotes")
    k.add_argument("poly")
    k.add_argument("quotes")
    k.add_argument("--out")
    k.add_argument("--starts", type=int, default=5)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--method", choices=("nelder-mead", "gradient"), default="nelder-mead")
    k.add_argument("--threads", type=int, default=1)
    k.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("bench", help="degree-doubling convergence table (CSV)")
    _add_model_args(s, bench=True)
    s.add_argument("--levels", default="3,6,12", help="uniform degrees to build")
    s.add_argument("--control", type=int, default=7, help="control grid points per axis + 1")
    s.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"chebrb {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
