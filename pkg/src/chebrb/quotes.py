"""Option quote records and their CSV form."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

QUOTE_COLUMNS = ("spot", "strike", "maturity_days", "rate_annual", "price")


@dataclass(frozen=True)
class QuoteSet:
    """Column-oriented European call quotes."""

    spot: np.ndarray
    strike: np.ndarray
    maturity_days: np.ndarray
    rate_annual: np.ndarray
    price: np.ndarray

    def __post_init__(self):
        cols = {}
        for name in QUOTE_COLUMNS:
            cols[name] = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1)
        n = cols["spot"].size
        if n == 0:
            raise ValueError("a quote set needs at least one quote")
        if any(c.size != n for c in cols.values()):
            raise ValueError("all quote columns must have the same length")
        if np.any(cols["price"] < 0) or np.any(cols["maturity_days"] < 0):
            raise DomainError("prices and maturities must be >= 0")
        if np.any(cols["spot"] <= 0) or np.any(cols["strike"] <= 0):
            raise DomainError("spots and strikes must be > 0")
        for name, c in cols.items():
            object.__setattr__(self, name, c)

    def __len__(self):
        return self.spot.size

    def with_prices(self, price) -> "QuoteSet":
        return QuoteSet(self.spot, self.strike, self.maturity_days, self.rate_annual, price)


def read_quotes_csv(path) -> QuoteSet:
    """Parse a quotes CSV with header ``spot,strike,maturity_days,rate_annual,price``."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty quotes file")
        header = [h.strip() for h in header]
        missing = [c for c in QUOTE_COLUMNS if c not in header]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        idx = [header.index(c) for c in QUOTE_COLUMNS]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(row[i]) for i in idx])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}: malformed row {lineno}: {row}") from exc
    if not rows:
        raise ValueError(f"{path}: no quotes")
    a = np.array(rows)
    return QuoteSet(*a.T)


def write_quotes_csv(path, quotes: QuoteSet) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(QUOTE_COLUMNS)
        for row in zip(*(getattr(quotes, c) for c in QUOTE_COLUMNS)):
            w.writerow([repr(float(v)) for v in row])
