"""Daily home-battery dispatch environment.

Money is carried in integer cents and energy in integer kWh so that
accumulated rewards are exact. Prices are revealed at the start of a day,
before the action is chosen.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ConfigError, InfeasibleAction


def dollars_to_cents(value) -> int:
    """Convert a dollar amount (int, float or str) to exact integer cents."""
    cents = Decimal(str(value)) * 100
    if cents != cents.to_integral_value():
        raise ConfigError(f"{value!r} is not a whole number of cents")
    return int(cents)


def cents_to_json(cents) -> int | float:
    """Dollar amount for JSON output; ints stay ints."""
    if isinstance(cents, Fraction) and cents.denominator != 1:
        return float(cents / 100)
    cents = int(cents)
    if cents % 100 == 0:
        return cents // 100
    return cents / 100


@dataclass(frozen=True)
class PriceModel:
    """I.i.d. daily price distribution over a few discrete levels (cents/kWh)."""

    levels: tuple[int, ...] = (1000, 500)
    probabilities: tuple[float, ...] = (0.5, 0.5)

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(x) for x in self.levels))
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))
        if not self.levels:
            raise ConfigError("price model needs at least one level")
        if len(self.levels) != len(self.probabilities):
            raise ConfigError("levels and probabilities differ in length")
        if any(x <= 0 for x in self.levels):
            raise ConfigError("price levels must be strictly positive")
        if any(p < 0 or p > 1 for p in self.probabilities):
            raise ConfigError("probabilities must lie in [0, 1]")
        if abs(sum(self.probabilities) - 1.0) > 1e-12:
            raise ConfigError("probabilities must sum to 1")

    @classmethod
    def from_dollars(cls, levels: Sequence, probabilities: Sequence[float]) -> "PriceModel":
        return cls(tuple(dollars_to_cents(x) for x in levels), tuple(probabilities))

    @property
    def exact_probabilities(self) -> tuple[Fraction, ...]:
        # decimal-string route keeps 0.5 -> 1/2, 0.1 -> 1/10
        return tuple(Fraction(repr(p)) for p in self.probabilities)

    @property
    def low(self) -> int:
        return min(self.levels)

    @property
    def high(self) -> int:
        return max(self.levels)


@dataclass(frozen=True)
class BatteryConfig:
    capacity_kwh: int = 10
    floor_kwh: int = 0
    step_kwh: int = 1
    horizon_days: int = 20
    initial_soc_kwh: int = 5

    def __post_init__(self):
        for name in ("capacity_kwh", "floor_kwh", "step_kwh", "horizon_days", "initial_soc_kwh"):
            value = getattr(self, name)
            if int(value) != value:
                raise ConfigError(f"{name} must be a whole number, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.step_kwh <= 0:
            raise ConfigError("step_kwh must be positive")
        if self.horizon_days < 1:
            raise ConfigError("horizon_days must be at least 1")
        if not self.floor_kwh <= self.initial_soc_kwh <= self.capacity_kwh:
            raise ConfigError("need floor <= initial SoC <= capacity")

    @property
    def soc_grid(self) -> tuple[int, ...]:
        return tuple(range(self.floor_kwh, self.capacity_kwh + 1, self.step_kwh))

    @property
    def grid_aligned(self) -> bool:
        return (self.capacity_kwh - self.floor_kwh) % self.step_kwh == 0


class DispatchAction(str, enum.Enum):
    CHARGE = "Charge"
    DISCHARGE = "Discharge"
    HOLD = "Hold"
    SERVE_LOAD = "ServeLoad"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Intervention:
    blackout_days: frozenset[int] = field(default_factory=lambda: frozenset({10}))

    def __post_init__(self):
        object.__setattr__(self, "blackout_days", frozenset(int(d) for d in self.blackout_days))

    @classmethod
    def none(cls) -> "Intervention":
        return cls(frozenset())

    def validate(self, config: BatteryConfig) -> None:
        bad = [d for d in self.blackout_days if not 1 <= d <= config.horizon_days]
        if bad:
            raise ConfigError(f"blackout days outside the horizon: {sorted(bad)}")

    def is_blackout(self, day: int) -> bool:
        return day in self.blackout_days


@dataclass(frozen=True)
class DayState:
    day: int
    price: int
    soc: int
    blackout: bool = False


def sample_price(model: PriceModel, rng: np.random.Generator) -> int:
    """Draw one daily price level."""
    idx = rng.choice(len(model.levels), p=model.probabilities)
    return model.levels[int(idx)]


def sample_price_path(model: PriceModel, horizon: int, rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(sample_price(model, rng) for _ in range(horizon))


def feasibility_error(state: DayState, action: DispatchAction, config: BatteryConfig) -> str | None:
    """Reason the action is illegal at ``state``, or None when it is legal."""
    if state.blackout:
        if action in (DispatchAction.CHARGE, DispatchAction.DISCHARGE):
            return f"{action} is not allowed on a blackout day"
        return None
    if action is DispatchAction.SERVE_LOAD:
        return "ServeLoad is only allowed on a blackout day"
    if action is DispatchAction.DISCHARGE and state.soc < config.floor_kwh + config.step_kwh:
        return f"cannot discharge at SoC {state.soc}"
    if action is DispatchAction.CHARGE and state.soc > config.capacity_kwh - config.step_kwh:
        return f"cannot charge at SoC {state.soc}"
    return None


def is_feasible(state: DayState, action: DispatchAction, config: BatteryConfig) -> bool:
    return feasibility_error(state, action, config) is None


def step(state: DayState, action: DispatchAction, config: BatteryConfig) -> tuple[int, int]:
    """Apply one day's action. Returns ``(next_soc, reward_cents)``."""
    reason = feasibility_error(state, action, config)
    if reason is not None:
        raise InfeasibleAction(reason)
    if action is DispatchAction.DISCHARGE:
        return state.soc - config.step_kwh, state.price * config.step_kwh
    if action is DispatchAction.CHARGE:
        return state.soc + config.step_kwh, -state.price * config.step_kwh
    if action is DispatchAction.SERVE_LOAD:
        # serving household demand during a blackout earns nothing
        return config.floor_kwh, 0
    return state.soc, 0


def terminal_settlement(final_soc: int) -> int:
    """Leftover energy is not compensated when the battery is removed."""
    return 0
