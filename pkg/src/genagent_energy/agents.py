"""LLM-backed agents for both experiments.

A malformed response is re-prompted with a format reminder; after
``max_attempts`` failed parses the agent falls back to Hold (battery) or
no bids (auction) and records an incident.
"""

from __future__ import annotations

import logging
from typing import Sequence

from .auction import Bid, BidderView, RoundResult, money_json
from .battery import BatteryConfig, DayState, DispatchAction, PriceModel, cents_to_json
from .bidding import ValuationProfile
from .dispatch import DayRecord
from .errors import ParseFailure
from .memory import MemoryStore, update_memory
from .prompts import AuctionObjective, IclExampleSet, Persona, build_auction_prompt, build_battery_prompt
from .tarj import TarjRecord, parse_tarj

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 3


def format_reminder(error: ParseFailure, mode: str) -> str:
    fields = "Thoughts:, Action:, Reflection:, Journal:"
    if mode == "auction":
        fields = "Thoughts:, Action: (followed by the ChosenSubset: line and one bid line per product), Reflection:, Journal:"
    return (
        "\n\nFORMAT REMINDER: your previous answer could not be used "
        f"({error}). Answer again using exactly these labelled fields, in order: {fields}"
    )


def _ask(client, prompt: str, mode: str, items: Sequence[str], max_attempts: int):
    """Returns ``(record or None, attempts, last_error)``."""
    text = prompt
    error = None
    for attempt in range(1, max_attempts + 1):
        response = client.complete(text)
        try:
            return parse_tarj(response, mode, items), attempt, None
        except ParseFailure as exc:
            error = exc
            log.warning("unparseable %s response (attempt %d): %s", mode, attempt, exc)
            text = prompt + format_reminder(exc, mode)
    return None, max_attempts, error


class LlmBatteryAgent:
    def __init__(
        self,
        name: str,
        persona: Persona,
        client,
        config: BatteryConfig,
        model: PriceModel,
        icl: IclExampleSet | None = None,
        window: int | None = 20,
        max_attempts: int = MAX_ATTEMPTS,
    ):
        self.name = name
        self.persona = persona
        self.client = client
        self.config = config
        self.model = model
        self.icl = icl
        self.memory = MemoryStore(window=window, label="Day")
        self.max_attempts = max_attempts
        self.records: list[dict] = []
        self.incidents: list[dict] = []
        self._pending: TarjRecord | None = None

    def act(self, state: DayState) -> DispatchAction:
        prompt = build_battery_prompt(self.persona, state, self.memory, self.icl, self.config, self.model)
        record, attempts, error = _ask(self.client, prompt, "battery", (), self.max_attempts)
        self._pending = record
        if record is None:
            self.incidents.append({"day": state.day, "attempts": attempts, "error": str(error)})
            self.records.append({"day": state.day, "attempts": attempts, "record": None})
            return DispatchAction.HOLD
        self.records.append({"day": state.day, "attempts": attempts, "record": record.to_json()})
        return record.parsed_action

    def observe(self, day: DayRecord) -> None:
        record, self._pending = self._pending, None
        if record is None:
            return
        outcome = (
            f"price ${cents_to_json(day.price)}/kWh, action {day.action.value}"
            f"{' (requested action was infeasible)' if day.coerced else ''}, "
            f"reward ${cents_to_json(day.reward)}, SoC {day.soc_before} -> {day.soc_after} kWh"
            f"{', blackout day' if day.blackout else ''}"
        )
        self.memory = update_memory(self.memory, record, outcome, index=day.day)


def _describe_bids(bids: Sequence[Bid]) -> str:
    if not bids:
        return "no bids"
    return ", ".join(f"{b.item} at {money_json(b.amount)}" for b in bids)


class LlmAuctionAgent:
    def __init__(
        self,
        bidder: str,
        objective: AuctionObjective,
        client,
        profile: ValuationProfile,
        window: int | None = None,
        max_attempts: int = MAX_ATTEMPTS,
    ):
        self.bidder = str(bidder)
        self.objective = objective
        self.agent_type = objective.kind.value
        self.client = client
        self.profile = profile
        self.memory = MemoryStore(window=window, label="Round")
        self.max_attempts = max_attempts
        self.incidents: list[dict] = []
        self.last_record: dict | None = None
        self._pending: tuple[TarjRecord | None, list[Bid]] | None = None

    def bid(self, view: BidderView) -> list[Bid]:
        prompt = build_auction_prompt(self.objective, self.bidder, view, self.memory, self.profile)
        record, attempts, error = _ask(self.client, prompt, "auction", view.item_names, self.max_attempts)
        if record is None:
            self.incidents.append({"round": view.round, "attempts": attempts, "error": str(error)})
            self.last_record = {"attempts": attempts, "record": None}
            self._pending = (None, [])
            return []
        bids = [
            Bid(self.bidder, name, amount)
            for name, amount in record.bids.items()
            if amount is not None
        ]
        self.last_record = {"attempts": attempts, "record": record.to_json()}
        self._pending = (record, bids)
        return bids

    def observe(self, view: BidderView, result: RoundResult) -> None:
        record, bids = self._pending if self._pending else (None, [])
        self._pending = None
        if record is None:
            return
        standings = []
        for item in result.items:
            holder = "you" if item.high_bidder == self.bidder else (
                "nobody" if item.high_bidder is None else f"bidder {item.high_bidder}"
            )
            mine = [b for b in item.rejected if b[0].bidder == self.bidder]
            note = " (your bid was below the minimum)" if mine else ""
            standings.append(f"{item.item} price {money_json(item.price)} held by {holder}{note}")
        outcome = f"you submitted {_describe_bids(bids)}; after clearing: " + "; ".join(standings)
        self.memory = update_memory(self.memory, record, outcome, index=result.round)
