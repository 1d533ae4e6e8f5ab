"""s-score mean-reversion experts.

Each expert watches the standardized deviation of price from its rolling
mean and runs a three-state position machine:

    Flat  --(s < -gamma2)-->  Long   --(s > -gamma1)-->  Flat
    Flat  --(s > +gamma2)-->  Short  --(s < +gamma1)-->  Flat

gamma1 < gamma2 gives hysteresis: a wide band to open, a narrow one to close.
With (0.5, 1.25) this is the classic Avellaneda-Lee rule set.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .ensemble import LossMode
from .errors import DegenerateVolatilityError, InvalidArgumentError, NotEnoughDataError

DEFAULT_WINDOW = 60
DEFAULT_CAP = 0.05


class Position(str, Enum):
    FLAT = "flat"
    LONG = "long"
    SHORT = "short"


@dataclass(frozen=True, order=True)
class ExpertSpec:
    gamma1: float
    gamma2: float
    stats_window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if not (0.0 < self.gamma1 < self.gamma2):
            raise InvalidArgumentError(
                f"need 0 < gamma1 < gamma2, got gamma1={self.gamma1}, gamma2={self.gamma2}"
            )
        if self.stats_window < 2:
            raise InvalidArgumentError(f"stats_window must be >= 2, got {self.stats_window}")

    @property
    def label(self) -> str:
        return f"g1={self.gamma1:g},g2={self.gamma2:g}"


@dataclass(frozen=True)
class ExpertState:
    position: Position = Position.FLAT
    entry_price: float | None = None

    def __post_init__(self):
        if (self.entry_price is None) != (self.position is Position.FLAT):
            raise InvalidArgumentError("entry_price must be set iff the position is open")


@dataclass(frozen=True)
class SScore:
    value: float
    mean: float
    std: float
    price: float


def rolling_stats(prices, end_index: int, window: int) -> tuple[float, float]:
    """Mean and sample std (divisor ``window - 1``) of the ``window`` prices
    ending at ``end_index`` inclusive.

    ``prices`` may be a PriceSeries or any 1-d sequence. A window whose
    values are all identical reports std exactly 0.0.
    """
    if window < 2:
        raise InvalidArgumentError(f"window must be >= 2, got {window}")
    values = np.asarray(getattr(prices, "prices", prices), dtype=float)
    if end_index < window - 1:
        raise NotEnoughDataError(
            f"window {window} needs end_index >= {window - 1}, got {end_index}"
        )
    if end_index >= len(values):
        raise InvalidArgumentError(f"end_index {end_index} out of range for length {len(values)}")
    chunk = values[end_index - window + 1:end_index + 1]
    mean = float(chunk.mean())
    # Rounding in the mean would otherwise leave a spurious ~1e-16 std.
    if chunk.min() == chunk.max():
        return float(chunk[0]), 0.0
    return mean, float(chunk.std(ddof=1))


def s_score(price: float, mean: float, std: float) -> float:
    if std < 0.0:
        raise InvalidArgumentError(f"std must be nonnegative, got {std}")
    if std == 0.0:
        raise DegenerateVolatilityError("zero standard deviation; no signal this round")
    return (price - mean) / std


def compute_s_score(prices, end_index: int, window: int) -> SScore:
    values = getattr(prices, "prices", prices)
    mean, std = rolling_stats(values, end_index, window)
    price = float(values[end_index])
    return SScore(value=s_score(price, mean, std), mean=mean, std=std, price=price)


def step_position(state: ExpertState, s: float, spec: ExpertSpec, price: float) -> ExpertState:
    """Advance the position machine by one signal.

    Closing rules are checked before opening rules and only a flat expert may
    open, so Long never becomes Short (or vice versa) in a single step.
    """
    if state.position is Position.LONG:
        return ExpertState() if s > -spec.gamma1 else state
    if state.position is Position.SHORT:
        return ExpertState() if s < spec.gamma1 else state
    if s < -spec.gamma2:
        return ExpertState(Position.LONG, float(price))
    if s > spec.gamma2:
        return ExpertState(Position.SHORT, float(price))
    return state


def expert_grid(
    gamma1_values: Sequence[float], gamma2_values: Sequence[float], window: int = DEFAULT_WINDOW
) -> list[ExpertSpec]:
    """All (gamma1, gamma2) pairs with gamma1 < gamma2, sorted lexicographically."""
    for g in itertools.chain(gamma1_values, gamma2_values):
        if not (g > 0 and math.isfinite(g)):
            raise InvalidArgumentError(f"thresholds must be positive and finite, got {g}")
    pairs = sorted(
        {(float(a), float(b)) for a in gamma1_values for b in gamma2_values if a < b}
    )
    if not pairs:
        raise InvalidArgumentError("expert grid is empty after filtering gamma1 < gamma2")
    return [ExpertSpec(a, b, window) for a, b in pairs]


def round_return(position: ExpertState | Position, price_prev: float, price_now: float) -> float:
    """Simple return earned over one interval by the position held through it."""
    if not (price_prev > 0 and price_now > 0):
        raise InvalidArgumentError(f"prices must be positive, got {price_prev}, {price_now}")
    pos = getattr(position, "position", position)
    if pos is Position.FLAT:
        return 0.0
    r = (price_now - price_prev) / price_prev
    return r if pos is Position.LONG else -r


def return_to_loss(r: float, mode: LossMode | str = LossMode.CONTINUOUS, cap: float = DEFAULT_CAP) -> float:
    """Map a round return to a loss in [0, 1].

    Zero-one: a negative return is a mistake. Continuous: affine in r with
    r = 0 at 0.5 and r = -cap / +cap at 1 / 0, clamped outside.
    """
    if not cap > 0:
        raise InvalidArgumentError(f"cap must be positive, got {cap}")
    if LossMode(mode) is LossMode.ZERO_ONE:
        return 1.0 if r < 0 else 0.0
    return min(1.0, max(0.0, 0.5 - r / (2.0 * cap)))
