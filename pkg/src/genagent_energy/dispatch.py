"""Backward-induction DP and greedy benchmarks for battery dispatch.

The DP maximises expected grid revenue over the horizon with the price
observed before acting. Blackouts are not part of the model; when a
benchmark policy is simulated with an intervention, blackout days are
forced to Hold by the simulator.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from .battery import (
    BatteryConfig,
    DayState,
    DispatchAction,
    Intervention,
    PriceModel,
    cents_to_json,
    feasibility_error,
    sample_price_path,
    step,
    terminal_settlement,
)
from .errors import InvalidGrid, OutOfRange

log = logging.getLogger(__name__)

# order doubles as the tie-break preference among equal Q-values
TIE_ORDER = (DispatchAction.HOLD, DispatchAction.DISCHARGE, DispatchAction.CHARGE)

GRID_ACTIONS = {
    DispatchAction.HOLD: 0,
    DispatchAction.DISCHARGE: 1,
    DispatchAction.CHARGE: -1,
}


@dataclass(frozen=True)
class ValueTable:
    """Optimal expected revenue (exact cents) by day and SoC.

    ``rows[t - 1][i]`` holds the value at day ``t`` (1..T+1) and SoC
    ``soc_grid[i]``; the final row is the zero terminal value.
    """

    soc_grid: tuple[int, ...]
    rows: tuple[tuple[Fraction, ...], ...]

    @property
    def horizon(self) -> int:
        return len(self.rows) - 1

    def value(self, day: int, soc: int) -> Fraction:
        if not 1 <= day <= self.horizon + 1 or soc not in self.soc_grid:
            raise OutOfRange(f"(day={day}, soc={soc}) outside the value table")
        return self.rows[day - 1][self.soc_grid.index(soc)]

    def to_json(self) -> dict:
        return {
            "grid": {
                "days": list(range(1, self.horizon + 2)),
                "soc_kwh": list(self.soc_grid),
            },
            "layout": "row-major [day][soc]",
            "values_dollars": [cents_to_json(v) for row in self.rows for v in row],
            "values_exact_cents": [str(v) for row in self.rows for v in row],
        }


@dataclass(frozen=True)
class PolicyTable:
    """Arg-max action by (day, SoC, price level)."""

    soc_grid: tuple[int, ...]
    price_levels: tuple[int, ...]
    actions: tuple[tuple[tuple[DispatchAction, ...], ...], ...]

    @property
    def horizon(self) -> int:
        return len(self.actions)

    def to_json(self) -> dict:
        return {
            "grid": {
                "days": list(range(1, self.horizon + 1)),
                "soc_kwh": list(self.soc_grid),
                "price_levels_dollars": [cents_to_json(p) for p in self.price_levels],
            },
            "layout": "row-major [day][soc][price]",
            "actions": [a.value for day in self.actions for row in day for a in row],
        }


def solve_dp(config: BatteryConfig, model: PriceModel) -> tuple[ValueTable, PolicyTable]:
    if not config.grid_aligned:
        raise InvalidGrid("capacity - floor must be a multiple of step")
    grid = config.soc_grid
    probs = model.exact_probabilities
    n = len(grid)
    T = config.horizon_days

    next_v = [Fraction(0)] * n
    value_rows = [tuple(next_v)]
    policy_rows = []
    for day in range(T, 0, -1):
        v_row = []
        p_row = []
        for i, soc in enumerate(grid):
            expected = Fraction(0)
            per_price = []
            for price, prob in zip(model.levels, probs):
                state = DayState(day=day, price=price, soc=soc)
                best_q = None
                best_a = None
                for action in TIE_ORDER:
                    if feasibility_error(state, action, config) is not None:
                        continue
                    q = price * config.step_kwh * GRID_ACTIONS[action] + next_v[i - GRID_ACTIONS[action]]
                    if best_q is None or q > best_q:
                        best_q, best_a = q, action
                expected += prob * best_q
                per_price.append(best_a)
            v_row.append(expected)
            p_row.append(tuple(per_price))
        next_v = v_row
        value_rows.append(tuple(v_row))
        policy_rows.append(tuple(p_row))
    value_rows.reverse()
    policy_rows.reverse()
    return (
        ValueTable(soc_grid=grid, rows=tuple(value_rows)),
        PolicyTable(soc_grid=grid, price_levels=model.levels, actions=tuple(policy_rows)),
    )


def dp_action(policy: PolicyTable, day: int, soc: int, price: int) -> DispatchAction:
    if not 1 <= day <= policy.horizon:
        raise OutOfRange(f"day {day} outside 1..{policy.horizon}")
    if soc not in policy.soc_grid:
        raise OutOfRange(f"SoC {soc} not on the grid")
    if price not in policy.price_levels:
        raise OutOfRange(f"price {price} is not a modelled level")
    return policy.actions[day - 1][policy.soc_grid.index(soc)][policy.price_levels.index(price)]


def greedy_action(price: int, soc: int, config: BatteryConfig, model: PriceModel) -> DispatchAction:
    """Charge at the lowest price level, discharge at the highest, else hold."""
    if model.low == model.high:
        return DispatchAction.HOLD
    state = DayState(day=1, price=price, soc=soc)
    if price == model.low and feasibility_error(state, DispatchAction.CHARGE, config) is None:
        return DispatchAction.CHARGE
    if price == model.high and feasibility_error(state, DispatchAction.DISCHARGE, config) is None:
        return DispatchAction.DISCHARGE
    return DispatchAction.HOLD


def dp_policy(policy: PolicyTable) -> Callable[[DayState], DispatchAction]:
    return lambda s: dp_action(policy, s.day, s.soc, s.price)


def greedy_policy(config: BatteryConfig, model: PriceModel) -> Callable[[DayState], DispatchAction]:
    return lambda s: greedy_action(s.price, s.soc, config, model)


@dataclass(frozen=True)
class DayRecord:
    day: int
    price: int
    soc_before: int
    action: DispatchAction
    reward: int
    soc_after: int
    blackout: bool
    coerced: bool = False

    def to_json(self) -> dict:
        return {
            "day": self.day,
            "price": cents_to_json(self.price),
            "soc_before": self.soc_before,
            "action": self.action.value,
            "reward": cents_to_json(self.reward),
            "soc_after": self.soc_after,
            "blackout": self.blackout,
        }


@dataclass(frozen=True)
class Trajectory:
    days: tuple[DayRecord, ...]
    total_reward: int

    @property
    def final_soc(self) -> int:
        return self.days[-1].soc_after

    @property
    def coerced_days(self) -> int:
        return sum(r.coerced for r in self.days)

    def cumulative_rewards(self) -> list[int]:
        out, acc = [], 0
        for r in self.days:
            acc += r.reward
            out.append(acc)
        return out


def simulate_policy(
    policy_fn: Callable[[DayState], DispatchAction],
    config: BatteryConfig,
    model: PriceModel,
    intervention: Intervention | None = None,
    seed: int | None = None,
    *,
    prices: Iterable[int] | None = None,
    blackout_aware: bool = False,
    observer: Callable[[DayRecord], None] | None = None,
) -> Trajectory:
    """Roll a policy through the horizon.

    The price path is drawn up front from ``seed`` unless ``prices`` is
    given (common random numbers across policies). Infeasible actions are
    replaced by Hold with a warning. Policies that are not
    ``blackout_aware`` are not consulted on blackout days and hold instead.
    """
    intervention = intervention if intervention is not None else Intervention.none()
    intervention.validate(config)
    if prices is None:
        prices = sample_price_path(model, config.horizon_days, np.random.default_rng(seed))
    prices = tuple(prices)
    if len(prices) != config.horizon_days:
        raise ValueError("price path length must equal the horizon")

    soc = config.initial_soc_kwh
    total = 0
    records = []
    for day, price in enumerate(prices, start=1):
        state = DayState(day=day, price=price, soc=soc, blackout=intervention.is_blackout(day))
        coerced = False
        if state.blackout and not blackout_aware:
            action = DispatchAction.HOLD
        else:
            action = policy_fn(state)
            reason = feasibility_error(state, action, config)
            if reason is not None:
                log.warning("day %d: %s; holding instead", day, reason)
                action = DispatchAction.HOLD
                coerced = True
        next_soc, reward = step(state, action, config)
        total += reward
        record = DayRecord(day, price, soc, action, reward, next_soc, state.blackout, coerced)
        records.append(record)
        if observer is not None:
            observer(record)
        soc = next_soc
    total += terminal_settlement(soc)
    return Trajectory(days=tuple(records), total_reward=total)
