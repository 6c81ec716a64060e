"""Simultaneous ascending auction (SAA) state machine.

Each round every bidder sees the standing high bid ``H`` and high bidder
``w`` per item and submits sealed bids. A bid is valid when it reaches the
bidder's minimum price: ``H`` for the incumbent, ``H + increment`` for
everyone else (including everyone when the item has no incumbent yet).
The highest valid bid sets the new ``H``; ties at the top are broken
uniformly at random. The auction stops after a round in which no price
and no high bidder changed.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Any, Protocol, Sequence

import numpy as np

from .errors import DuplicateBid, MismatchedAuction, UnknownBidder, UnknownItem

log = logging.getLogger(__name__)

BELOW_MINIMUM = "BelowMinimum"


def to_money(value) -> Decimal:
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        return Decimal(repr(value))
    return Decimal(value)


def money_json(value: Decimal | None):
    if value is None:
        return None
    value = to_money(value)
    if value == value.to_integral_value():
        return int(value)
    return float(value)


@dataclass(frozen=True)
class Item:
    name: str
    start_price: Decimal = Decimal(0)
    increment: Decimal = Decimal(1)

    def __post_init__(self):
        object.__setattr__(self, "start_price", to_money(self.start_price))
        object.__setattr__(self, "increment", to_money(self.increment))
        if self.increment <= 0:
            raise ValueError(f"{self.name}: increment must be positive")
        if self.start_price < 0:
            raise ValueError(f"{self.name}: start price must be non-negative")


@dataclass(frozen=True)
class Bid:
    bidder: str
    item: str
    amount: Decimal

    def __post_init__(self):
        object.__setattr__(self, "amount", to_money(self.amount))
        if self.amount < 0:
            raise ValueError("bid amounts must be non-negative")


@dataclass(frozen=True)
class Standing:
    price: Decimal
    bidder: str | None = None


@dataclass(frozen=True)
class ItemResult:
    item: str
    accepted: tuple[Bid, ...]
    rejected: tuple[tuple[Bid, str], ...]
    price: Decimal
    high_bidder: str | None
    tie_broken: bool = False
    tie_losers: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "item": self.item,
            "accepted": [{"bidder": b.bidder, "amount": money_json(b.amount)} for b in self.accepted],
            "rejected": [
                {"bidder": b.bidder, "amount": money_json(b.amount), "reason": why}
                for b, why in self.rejected
            ],
            "price": money_json(self.price),
            "high_bidder": self.high_bidder,
            "tie_broken": self.tie_broken,
            "tie_losers": list(self.tie_losers),
        }


@dataclass(frozen=True)
class RoundResult:
    round: int
    items: tuple[ItemResult, ...]
    changed: bool

    def item(self, name: str) -> ItemResult:
        for r in self.items:
            if r.item == name:
                return r
        raise UnknownItem(name)

    def to_json(self) -> dict:
        return {"round": self.round, "changed": self.changed, "items": [r.to_json() for r in self.items]}


@dataclass(frozen=True)
class AuctionState:
    items: tuple[Item, ...]
    bidders: tuple[str, ...]
    round: int = 0
    standing: tuple[Standing, ...] = ()
    history: tuple[RoundResult, ...] = ()

    def __post_init__(self):
        names = [it.name for it in self.items]
        if len(set(names)) != len(names):
            raise ValueError("item names must be unique")
        if len(set(self.bidders)) != len(self.bidders):
            raise ValueError("bidder ids must be unique")
        if not self.standing:
            object.__setattr__(self, "standing", tuple(Standing(it.start_price) for it in self.items))

    @classmethod
    def start(cls, items: Sequence[Item], bidders: Sequence[str]) -> "AuctionState":
        return cls(items=tuple(items), bidders=tuple(str(b) for b in bidders))

    @property
    def item_names(self) -> tuple[str, ...]:
        return tuple(it.name for it in self.items)

    def index(self, item: str) -> int:
        try:
            return self.item_names.index(item)
        except ValueError:
            raise UnknownItem(item) from None

    def price(self, item: str) -> Decimal:
        return self.standing[self.index(item)].price

    def high_bidder(self, item: str) -> str | None:
        return self.standing[self.index(item)].bidder

    def prices(self) -> dict[str, Decimal]:
        return {it.name: s.price for it, s in zip(self.items, self.standing)}

    def allocation(self) -> dict[str, str | None]:
        return {it.name: s.bidder for it, s in zip(self.items, self.standing)}


@dataclass(frozen=True)
class ItemView:
    name: str
    price: Decimal
    high_bidder: str | None
    min_bid: Decimal
    increment: Decimal
    start_price: Decimal


@dataclass(frozen=True)
class BidderView:
    """What one bidder is shown before submitting bids for ``round``."""

    bidder: str
    round: int
    items: tuple[ItemView, ...]

    def item(self, name: str) -> ItemView:
        for it in self.items:
            if it.name == name:
                return it
        raise UnknownItem(name)

    @property
    def item_names(self) -> tuple[str, ...]:
        return tuple(it.name for it in self.items)

    def min_bids(self) -> dict[str, Decimal]:
        return {it.name: it.min_bid for it in self.items}

    def holds(self, name: str) -> bool:
        return self.item(name).high_bidder == self.bidder


def min_bid_price(state: AuctionState, bidder: str, item: str) -> Decimal:
    i = state.index(item)
    standing = state.standing[i]
    if standing.bidder is not None and standing.bidder == bidder:
        return standing.price
    return standing.price + state.items[i].increment


def bidder_view(state: AuctionState, bidder: str) -> BidderView:
    if bidder not in state.bidders:
        raise UnknownBidder(bidder)
    return BidderView(
        bidder=bidder,
        round=state.round + 1,
        items=tuple(
            ItemView(
                name=it.name,
                price=s.price,
                high_bidder=s.bidder,
                min_bid=min_bid_price(state, bidder, it.name),
                increment=it.increment,
                start_price=it.start_price,
            )
            for it, s in zip(state.items, state.standing)
        ),
    )


def clear_round(
    state: AuctionState, bids: Sequence[Bid], rng: np.random.Generator
) -> tuple[AuctionState, RoundResult]:
    """Validate sealed bids, update standing bids, and record the round."""
    seen = set()
    by_item: dict[str, list[Bid]] = {name: [] for name in state.item_names}
    for bid in bids:
        if bid.item not in by_item:
            raise UnknownItem(bid.item)
        if bid.bidder not in state.bidders:
            raise UnknownBidder(bid.bidder)
        key = (bid.bidder, bid.item)
        if key in seen:
            raise DuplicateBid(f"bidder {bid.bidder} bid twice on {bid.item}")
        seen.add(key)
        by_item[bid.item].append(bid)

    order = {b: i for i, b in enumerate(state.bidders)}
    new_standing = []
    results = []
    changed = False
    for it, old in zip(state.items, state.standing):
        accepted, rejected = [], []
        for bid in sorted(by_item[it.name], key=lambda b: order[b.bidder]):
            if bid.amount < min_bid_price(state, bid.bidder, it.name):
                rejected.append((bid, BELOW_MINIMUM))
            else:
                accepted.append(bid)
        standing = old
        tie_broken = False
        losers: tuple[str, ...] = ()
        if accepted:
            top = max(b.amount for b in accepted)
            tied = [b.bidder for b in accepted if b.amount == top]
            if top > old.price:
                if len(tied) > 1:
                    winner = tied[int(rng.integers(len(tied)))]
                    tie_broken = True
                    losers = tuple(b for b in tied if b != winner)
                else:
                    winner = tied[0]
                standing = Standing(top, winner)
            # top == old.price only happens for an incumbent rebid, which keeps (H, w)
        if standing != old:
            changed = True
        new_standing.append(standing)
        results.append(
            ItemResult(
                item=it.name,
                accepted=tuple(accepted),
                rejected=tuple(rejected),
                price=standing.price,
                high_bidder=standing.bidder,
                tie_broken=tie_broken,
                tie_losers=losers,
            )
        )

    result = RoundResult(round=state.round + 1, items=tuple(results), changed=changed)
    new_state = replace(
        state,
        round=state.round + 1,
        standing=tuple(new_standing),
        history=state.history + (result,),
    )
    return new_state, result


def is_terminated(previous: AuctionState, current: AuctionState) -> bool:
    if previous.items != current.items or previous.bidders != current.bidders:
        raise MismatchedAuction("states belong to different auctions")
    if current.round < 1 or current.round != previous.round + 1:
        raise MismatchedAuction(
            f"rounds {previous.round} and {current.round} are not consecutive"
        )
    return previous.standing == current.standing


class BiddingAgent(Protocol):
    bidder: str

    def bid(self, view: BidderView) -> list[Bid]: ...

    def observe(self, view: BidderView, result: RoundResult) -> None: ...


@dataclass
class AuctionOutcome:
    allocation: dict[str, str | None]
    prices: dict[str, Decimal]
    rounds: list[RoundResult]
    states: list[AuctionState]
    terminated_naturally: bool
    records: list[dict[str, Any]] = field(default_factory=list)

    @property
    def rounds_used(self) -> int:
        return len(self.rounds)

    def price_path(self, item: str) -> list[Decimal]:
        """Standing high bid after each round."""
        return [r.item(item).price for r in self.rounds]

    def summary_json(self) -> dict:
        return {
            "allocation": dict(self.allocation),
            "prices": {k: money_json(v) for k, v in self.prices.items()},
            "rounds_used": self.rounds_used,
            "terminated_naturally": self.terminated_naturally,
        }


def run_auction(
    agents: Sequence[BiddingAgent],
    items: Sequence[Item],
    max_rounds: int = 100,
    rng: np.random.Generator | None = None,
    *,
    concurrent_bids: bool = False,
) -> AuctionOutcome:
    if not agents:
        raise ValueError("need at least one agent")
    if not items:
        raise ValueError("need at least one item")
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    rng = rng if rng is not None else np.random.default_rng()

    state = AuctionState.start(items, [a.bidder for a in agents])
    states = [state]
    rounds = []
    records = []
    natural = False
    pool = ThreadPoolExecutor(max_workers=len(agents)) if concurrent_bids else None
    try:
        while state.round < max_rounds:
            # all views come from the same pre-round state: bids are sealed
            views = [bidder_view(state, a.bidder) for a in agents]
            if pool is not None:
                submitted = list(pool.map(lambda av: av[0].bid(av[1]), zip(agents, views)))
            else:
                submitted = [a.bid(v) for a, v in zip(agents, views)]
            bids = [b for batch in submitted for b in batch]
            for agent in agents:
                record = getattr(agent, "last_record", None)
                if record is not None:
                    records.append({"round": state.round + 1, "bidder": agent.bidder, "record": record})
            new_state, result = clear_round(state, bids, rng)
            rounds.append(result)
            states.append(new_state)
            for agent, view in zip(agents, views):
                observe = getattr(agent, "observe", None)
                if observe is not None:
                    observe(view, result)
            done = is_terminated(state, new_state)
            state = new_state
            if done:
                natural = True
                break
    finally:
        if pool is not None:
            pool.shutdown()

    return AuctionOutcome(
        allocation=state.allocation(),
        prices=state.prices(),
        rounds=rounds,
        states=states,
        terminated_naturally=natural,
        records=records,
    )
