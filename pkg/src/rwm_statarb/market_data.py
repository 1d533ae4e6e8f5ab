"""Price series: CSV ingestion and seeded Ornstein-Uhlenbeck generation."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, InvalidArgumentError


@dataclass(frozen=True, eq=False)
class PriceSeries:
    symbol: str
    timestamps: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        px = np.asarray(self.prices, dtype=float)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "prices", px)
        if ts.ndim != 1 or px.ndim != 1 or len(ts) != len(px):
            raise InvalidArgumentError("timestamps and prices must be 1-d and the same length")
        if len(px) == 0:
            raise InvalidArgumentError("a price series needs at least one observation")
        if np.any(np.diff(ts) <= 0):
            raise InvalidArgumentError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(px)) or np.any(px <= 0):
            raise InvalidArgumentError("prices must be finite and strictly positive")

    def __len__(self) -> int:
        return len(self.prices)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PriceSeries):
            return NotImplemented
        return (self.symbol == other.symbol
                and np.array_equal(self.timestamps, other.timestamps)
                and np.array_equal(self.prices, other.prices))


@dataclass(frozen=True)
class OuParams:
    theta: float
    mu_level: float
    sigma_noise: float
    x0: float
    dt: float
    n_steps: int
    seed: int = 0

    def __post_init__(self):
        if not self.theta >= 0:
            raise InvalidArgumentError(f"theta must be >= 0, got {self.theta}")
        if not self.sigma_noise >= 0:
            raise InvalidArgumentError(f"sigma_noise must be >= 0, got {self.sigma_noise}")
        if not self.dt > 0:
            raise InvalidArgumentError(f"dt must be > 0, got {self.dt}")
        if not self.theta * self.dt < 1:
            raise InvalidArgumentError(
                f"theta * dt must be < 1 for a stable discretization, got {self.theta * self.dt}"
            )
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidArgumentError(f"n_steps must be a positive integer, got {self.n_steps}")


def standard_normals(rng: np.random.Generator, size: int) -> np.ndarray:
    """Box-Muller on pairs of uniforms drawn from ``rng``.

    Uniform k of each pair is ``1 - rng.random()`` (so it lies in (0, 1]) for
    the radius and ``rng.random()`` for the angle; the cosine variate comes
    first, then the sine variate.
    """
    n_pairs = (size + 1) // 2
    u = rng.random((n_pairs, 2))
    radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    angle = 2.0 * math.pi * u[:, 1]
    z = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)]).ravel()
    return z[:size]


def generate_ou_log(params: OuParams) -> np.ndarray:
    """Euler-Maruyama path of the OU process in log-price space."""
    x = np.empty(params.n_steps)
    x[0] = params.x0
    eps = standard_normals(np.random.default_rng(params.seed), params.n_steps - 1)
    decay = params.theta * params.dt
    noise = params.sigma_noise * math.sqrt(params.dt)
    for k in range(params.n_steps - 1):
        x[k + 1] = x[k] + decay * (params.mu_level - x[k]) + noise * eps[k]
    return x


def generate_ou(params: OuParams, symbol: str = "OU", start: int = 0, interval: int = 1) -> PriceSeries:
    """Seeded OU series with prices ``exp(X_k)``; timestamps start at ``start``
    and advance by ``interval`` seconds."""
    x = generate_ou_log(params)
    ts = start + interval * np.arange(params.n_steps, dtype=np.int64)
    return PriceSeries(symbol, ts, np.exp(x))


def load_csv(path, price_column: str = "price", symbol: str | None = None) -> PriceSeries:
    """Read ``timestamp,<price_column>`` rows. Row numbers in errors count
    data rows from 1, header excluded."""
    path = os.fspath(path)
    timestamps: list[int] = []
    prices: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataFormatError(f"{path}: empty file")
        for col in ("timestamp", price_column):
            if col not in reader.fieldnames:
                raise DataFormatError(f"{path}: missing column {col!r}")
        for row_no, row in enumerate(reader, start=1):
            raw_ts, raw_px = row.get("timestamp"), row.get(price_column)
            try:
                ts = int(raw_ts)
                px = float(raw_px)
            except (TypeError, ValueError):
                raise DataFormatError(
                    f"{path}: row {row_no}: cannot parse timestamp={raw_ts!r} price={raw_px!r}",
                    row=row_no,
                ) from None
            if not (math.isfinite(px) and px > 0):
                raise DataFormatError(f"{path}: row {row_no}: price must be positive, got {raw_px}", row=row_no)
            if timestamps and ts <= timestamps[-1]:
                raise DataFormatError(
                    f"{path}: row {row_no}: timestamp {ts} does not increase", row=row_no
                )
            timestamps.append(ts)
            prices.append(px)
    if not prices:
        raise DataFormatError(f"{path}: no data rows")
    if symbol is None:
        symbol = os.path.splitext(os.path.basename(path))[0]
    return PriceSeries(symbol, np.array(timestamps, dtype=np.int64), np.array(prices))


def save_csv(series: PriceSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("timestamp,price\n")
        for ts, px in zip(series.timestamps, series.prices):
            fh.write(f"{int(ts)},{px:.17g}\n")
