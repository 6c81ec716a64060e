"""Prompt assembly for the battery and auction agents."""

from __future__ import annotations

import enum
import json
import string
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .auction import BidderView, money_json
from .battery import BatteryConfig, DayState, PriceModel, cents_to_json
from .bidding import ValuationProfile
from .errors import ConfigError, MissingPlaceholder
from .memory import MemoryStore
from .tarj import parse_tarj

AUCTION_PLACEHOLDERS = frozenset(
    {
        "bidder",
        "products_str",
        "prices",
        "high_bidders",
        "min_inc",
        "history_text",
        "journal_text",
        "val_json_str",
        "bid_lines",
    }
)


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files("genagent_energy").joinpath("templates", name).read_text(encoding="utf-8")


def template_fields(template: str) -> set[str]:
    return {f for _, f, _, _ in string.Formatter().parse(template) if f is not None}


def render_template(template: str, values: Mapping[str, object]) -> str:
    fields = template_fields(template)
    missing = fields - values.keys()
    unused = values.keys() - fields
    if missing or unused:
        raise MissingPlaceholder(
            f"template/substitution mismatch: missing={sorted(missing)} unused={sorted(unused)}"
        )
    return template.format(**values)


@dataclass(frozen=True)
class Persona:
    name: str
    description: str

    def __post_init__(self):
        if not self.description.strip():
            raise ConfigError(f"persona {self.name!r} needs a description")

    @classmethod
    def builtin(cls, name: str) -> "Persona":
        data = json.loads(
            resources.files("genagent_energy").joinpath("data", "personas.json").read_text()
        )
        if name not in data or name.startswith("_"):
            raise ConfigError(f"no built-in persona {name!r}")
        return cls(name, data[name])


class ObjectiveKind(str, enum.Enum):
    RULE_CENTRIC = "rule_centric"
    MYOPIC_PROFIT = "myopic_profit"
    STRATEGIC_OUTCOME = "strategic_outcome"


@dataclass(frozen=True)
class AuctionObjective:
    kind: ObjectiveKind
    template: str

    def __post_init__(self):
        missing = AUCTION_PLACEHOLDERS - template_fields(self.template)
        if missing:
            raise MissingPlaceholder(f"{self.kind.value} template lacks {sorted(missing)}")

    @classmethod
    def load(cls, kind) -> "AuctionObjective":
        kind = ObjectiveKind(kind)
        return cls(kind, load_template(f"{kind.value}.txt"))


@dataclass(frozen=True)
class IclExampleSet:
    examples: tuple[str, ...]
    source: str = ""
    mode: str = "battery"

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        if self.mode == "battery":
            for text in self.examples:
                parse_tarj(text, "battery")

    @classmethod
    def from_json(cls, data: Mapping) -> "IclExampleSet":
        return cls(tuple(data["examples"]), data.get("source", ""), data.get("mode", "battery"))

    @classmethod
    def load(cls, path) -> "IclExampleSet":
        return cls.from_json(json.loads(Path(path).read_text()))

    @classmethod
    def builtin_blackout(cls) -> "IclExampleSet":
        raw = resources.files("genagent_energy").joinpath("data", "icl_blackout_examples.json").read_text()
        return cls.from_json(json.loads(raw))

    def render(self) -> str:
        return "\n\n".join(
            f"--- Example {i} ---\n{text.strip()}" for i, text in enumerate(self.examples, start=1)
        )


def _money(cents) -> str:
    value = cents_to_json(cents)
    return f"${value}" if isinstance(value, int) else f"${value:.2f}"


def _price_distribution(model: PriceModel) -> str:
    parts = [f"{_money(level)}/kWh with probability {p:g}" for level, p in zip(model.levels, model.probabilities)]
    return " or ".join(parts)


def build_battery_prompt(
    persona: Persona,
    day_state: DayState,
    memory: MemoryStore,
    icl: IclExampleSet | None,
    config: BatteryConfig,
    model: PriceModel | None = None,
) -> str:
    model = model if model is not None else PriceModel()
    if day_state.blackout:
        blackout_block = load_template("blackout_notice.txt")
        action_menu = "SERVE LOAD or HOLD"
    else:
        blackout_block = ""
        action_menu = "CHARGE, DISCHARGE or HOLD"
    icl_block = ""
    if icl is not None:
        icl_block = render_template(load_template("icl_block.txt"), {"example_responses": icl.render()})
    values = {
        "horizon": config.horizon_days,
        "step": config.step_kwh,
        "floor": config.floor_kwh,
        "capacity": config.capacity_kwh,
        "price_distribution": _price_distribution(model),
        "persona_name": persona.name,
        "persona_description": persona.description,
        "day": day_state.day,
        "price": _money(day_state.price),
        "soc": day_state.soc,
        "blackout_block": blackout_block,
        "history_text": memory.history_text(),
        "journal_text": memory.journal_text(),
        "icl_block": icl_block,
        "action_menu": action_menu,
    }
    return render_template(load_template("battery.txt"), values)


def _json_map(mapping: Mapping) -> str:
    return json.dumps(mapping)


def valuation_json(profile: ValuationProfile, items: Sequence[str]) -> str:
    """Item values plus bundle overrides, bundle keys written as name lists."""
    table: dict[str, object] = {}
    for name in items:
        if name in profile.item_values:
            table[name] = money_json(profile.item_values[name])
    for bundle, value in profile.bundle_overrides.items():
        key = json.dumps([n for n in items if n in bundle])
        table[key] = money_json(value)
    return json.dumps(table, indent=2)


def build_auction_prompt(
    objective: AuctionObjective,
    bidder: str,
    view: BidderView,
    memory: MemoryStore,
    valuations: ValuationProfile,
) -> str:
    names = view.item_names
    unknown = set(valuations.item_values) - set(names)
    if unknown:
        raise ConfigError(f"valuations mention items outside the auction: {sorted(unknown)}")
    bid_lines = "\n".join(
        f"{it.name}: <your bid amount, or none> (your minimum valid bid this round: {money_json(it.min_bid)})"
        for it in view.items
    )
    values = {
        "bidder": bidder,
        "products_str": ", ".join(names),
        "prices": _json_map({it.name: money_json(it.price) for it in view.items}),
        "high_bidders": _json_map(
            {it.name: ("none" if it.high_bidder is None else f"bidder {it.high_bidder}") for it in view.items}
        ),
        "min_inc": _json_map({it.name: money_json(it.increment) for it in view.items}),
        "history_text": memory.history_text(),
        "journal_text": memory.journal_text(),
        "val_json_str": valuation_json(valuations, names),
        "bid_lines": bid_lines,
    }
    return render_template(objective.template, values)
