"""Straightforward bidding: demand the surplus-maximising bundle at the
current minimum prices and bid exactly those minimums.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Mapping

import numpy as np

from .auction import Bid, BidderView, RoundResult, money_json, to_money
from .errors import ConfigError, InstanceTooLarge, TooManyItems, UnknownItem

MAX_EXHAUSTIVE_ITEMS = 20


@dataclass(frozen=True)
class ValuationProfile:
    item_values: Mapping[str, Decimal]
    bundle_overrides: Mapping[frozenset, Decimal] = field(default_factory=dict)

    def __post_init__(self):
        values = {str(k): to_money(v) for k, v in self.item_values.items()}
        overrides = {frozenset(k): to_money(v) for k, v in self.bundle_overrides.items()}
        if any(v < 0 for v in values.values()) or any(v < 0 for v in overrides.values()):
            raise ConfigError("valuations must be non-negative")
        for key in overrides:
            if len(key) < 2:
                raise ConfigError("bundle overrides need at least two items")
            unknown = key - values.keys()
            if unknown:
                raise ConfigError(f"bundle override mentions unknown items {sorted(unknown)}")
        object.__setattr__(self, "item_values", values)
        object.__setattr__(self, "bundle_overrides", overrides)

    @property
    def items(self) -> tuple[str, ...]:
        return tuple(self.item_values)

    def to_json(self) -> dict:
        return {
            "items": {k: money_json(v) for k, v in self.item_values.items()},
            "bundles": [
                {"items": sorted(k, key=self.items.index), "value": money_json(v)}
                for k, v in self.bundle_overrides.items()
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ValuationProfile":
        return cls(
            item_values=dict(data["items"]),
            bundle_overrides={frozenset(b["items"]): b["value"] for b in data.get("bundles", [])},
        )


def load_valuations(path) -> dict[str, ValuationProfile]:
    """Read a ``{bidder: {items: {...}, bundles: [...]}}`` valuation file."""
    data = json.loads(Path(path).read_text())
    return {str(bidder): ValuationProfile.from_json(spec) for bidder, spec in data.items()}


@dataclass(frozen=True)
class ChosenBundle:
    items: frozenset
    expected_surplus: Decimal


def bundle_value(profile: ValuationProfile, subset) -> Decimal:
    subset = frozenset(subset)
    unknown = subset - profile.item_values.keys()
    if unknown:
        raise UnknownItem(", ".join(sorted(unknown)))
    if subset in profile.bundle_overrides:
        return profile.bundle_overrides[subset]
    return sum((profile.item_values[k] for k in subset), Decimal(0))


def _subsets(names):
    for size in range(len(names) + 1):
        yield from itertools.combinations(names, size)


def straightforward_bundle(
    profile: ValuationProfile, view: BidderView, prefer_larger: bool = True
) -> ChosenBundle:
    """Exhaustive search over every subset of the auction's items.

    Ties prefer the larger bundle (or the smaller one with
    ``prefer_larger=False``), then the earlier items in auction order.
    """
    names = view.item_names
    if len(names) > MAX_EXHAUSTIVE_ITEMS:
        raise TooManyItems(f"{len(names)} items exceeds {MAX_EXHAUSTIVE_ITEMS}")
    min_bids = view.min_bids()
    best_key = None
    best = None
    for subset in _subsets(names):
        if any(n not in profile.item_values for n in subset):
            # no valuation for an item means the bidder does not want it
            continue
        surplus = bundle_value(profile, subset) - sum((min_bids[n] for n in subset), Decimal(0))
        size = len(subset) if prefer_larger else -len(subset)
        # negated indices so that max() favours the lexicographically first subset
        key = (surplus, size, tuple(-names.index(n) for n in subset))
        if best_key is None or key > best_key:
            best_key, best = key, ChosenBundle(frozenset(subset), surplus)
    return best


def straightforward_bids(bundle: ChosenBundle, view: BidderView) -> list[Bid]:
    return [
        Bid(view.bidder, it.name, it.min_bid)
        for it in view.items
        if it.name in bundle.items and it.high_bidder != view.bidder
    ]


def optimal_bundle_brute(
    profile: ValuationProfile,
    view: BidderView,
    bid_grid_step=1,
    bid_cap=10,
) -> tuple[frozenset, dict[str, Decimal], Decimal]:
    """Brute-force the joint bundle-and-bid problem over a bid grid.

    Every subset is paired with every bid vector drawn from
    ``{0, step, 2*step, ..., cap}`` that respects each item's minimum bid.
    Returns ``(bundle, bids, surplus)`` for the best pair found; the empty
    bundle (surplus 0) is always available.
    """
    step = to_money(bid_grid_step)
    cap = to_money(bid_cap)
    names = view.item_names
    if len(names) > 3 or step <= 0 or cap / step > 50:
        raise InstanceTooLarge("brute force is limited to 3 items and 50 grid steps")
    n_steps = int(cap // step)
    grid = np.arange(n_steps + 1, dtype=np.int64)
    min_bids = view.min_bids()

    best = (frozenset(), {}, Decimal(0))
    for subset in _subsets(names):
        if not subset:
            continue
        if any(n not in profile.item_values for n in subset):
            continue
        axes = [grid[grid * step >= min_bids[n]] for n in subset]
        if any(a.size == 0 for a in axes):
            continue
        mesh = np.meshgrid(*axes, indexing="ij")
        cost_steps = sum(mesh)
        value = bundle_value(profile, subset)
        flat = int(np.argmin(cost_steps))
        idx = np.unravel_index(flat, cost_steps.shape)
        bids = {n: step * int(axes[j][idx[j]]) for j, n in enumerate(subset)}
        surplus = value - sum(bids.values(), Decimal(0))
        if surplus > best[2]:
            best = (frozenset(subset), bids, surplus)
    return best


class StraightforwardAgent:
    """Baseline bidder following the myopic straightforward strategy."""

    agent_type = "straightforward"

    def __init__(self, bidder: str, profile: ValuationProfile, prefer_larger: bool = True):
        self.bidder = str(bidder)
        self.profile = profile
        self.prefer_larger = prefer_larger
        self.last_bundle: ChosenBundle | None = None

    def bid(self, view: BidderView) -> list[Bid]:
        self.last_bundle = straightforward_bundle(self.profile, view, self.prefer_larger)
        return straightforward_bids(self.last_bundle, view)

    def observe(self, view: BidderView, result: RoundResult) -> None:
        pass
