"""Parsing and rendering of Thought-Action-Reflection-Journal responses."""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Mapping, Sequence

from .auction import money_json
from .battery import DispatchAction
from .errors import AmbiguousAction, ParseFailure, UnknownItemName

SECTIONS = ("Thoughts", "Action", "Reflection", "Journal")

_LABEL = re.compile(
    r"^[ \t>#*_-]*(thoughts?|action|reflection|journal)[ \t*_]*:[ \t*_]*",
    re.IGNORECASE | re.MULTILINE,
)
_SUBSET = re.compile(r"^[ \t*_-]*chosen[ _]?subset[ \t*_]*:(.*)$", re.IGNORECASE | re.MULTILINE)
_EMPTY_SUBSET = {"", "none", "nothing", "empty", "-", "{}", "[]"}

# ServeLoad phrases are matched first and blanked out, since they contain "discharge"
_SERVE = re.compile(r"fully\s+discharg\w*|\bserv(?:e|es|ing)\b", re.IGNORECASE)
_KEYWORDS = {
    DispatchAction.CHARGE: re.compile(r"\b(?:charg(?:e|es|ing)|buy\w*)\b", re.IGNORECASE),
    DispatchAction.DISCHARGE: re.compile(r"\b(?:discharg\w*|sell\w*)\b", re.IGNORECASE),
    DispatchAction.HOLD: re.compile(r"\b(?:hold\w*|nothing)\b", re.IGNORECASE),
}


@dataclass(frozen=True)
class TarjRecord:
    thoughts: str
    action_text: str
    reflection: str
    journal: str
    parsed_action: DispatchAction | None = None
    chosen_subset: frozenset | None = None
    bids: Mapping[str, Decimal | None] | None = None
    canonical_order: bool = True

    def to_json(self) -> dict:
        out = {
            "thoughts": self.thoughts,
            "action": self.action_text,
            "reflection": self.reflection,
            "journal": self.journal,
        }
        if self.parsed_action is not None:
            out["parsed_action"] = self.parsed_action.value
        if self.bids is not None:
            out["chosen_subset"] = sorted(self.chosen_subset)
            out["bids"] = {k: money_json(v) for k, v in self.bids.items()}
        return out


def _normalize(text: str) -> str:
    return " ".join(text.split())


def action_from_text(text: str) -> DispatchAction:
    """Map free-text battery actions onto the dispatch menu by keyword."""
    found = set()
    if _SERVE.search(text):
        found.add(DispatchAction.SERVE_LOAD)
        text = _SERVE.sub(" ", text)
    for action, pattern in _KEYWORDS.items():
        if pattern.search(text):
            found.add(action)
    if not found:
        raise ParseFailure("Action", "no recognisable action keyword")
    if len(found) > 1:
        raise AmbiguousAction("conflicting keywords: " + ", ".join(sorted(a.value for a in found)))
    return found.pop()


def _split_sections(text: str) -> tuple[dict[str, str], list[str]]:
    matches = list(_LABEL.finditer(text))
    sections: dict[str, str] = {}
    order = []
    for i, m in enumerate(matches):
        label = m.group(1).lower()
        name = "Thoughts" if label.startswith("thought") else label.capitalize()
        if name in sections:
            raise ParseFailure(name, "section appears more than once")
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        sections[name] = text[m.end():end]
        order.append(name)
    for name in SECTIONS:
        if name not in sections:
            raise ParseFailure(name, "section missing")
    return sections, order


def _resolve_item(token: str, items: Sequence[str]) -> str:
    lowered = {name.lower(): name for name in items}
    if token.lower() in lowered:
        return lowered[token.lower()]
    # allow a bare suffix like "A" for "Product A" when it is unambiguous
    hits = [name for name in items if name.lower().split()[-1] == token.lower()]
    if len(hits) == 1:
        return hits[0]
    raise UnknownItemName(token)


def _parse_auction_action(body: str, items: Sequence[str]):
    m = _SUBSET.search(body)
    if m is None:
        raise ParseFailure("ChosenSubset", "line missing")
    prose = body[: m.start()]
    raw = m.group(1).strip().strip("{}[]()").strip()
    chosen = set()
    if raw.lower() not in _EMPTY_SUBSET:
        for token in raw.split(","):
            token = token.strip().strip("\"'*")
            if token:
                chosen.add(_resolve_item(token, items))
    rest = body[m.end():]
    bids: dict[str, Decimal | None] = {}
    for name in items:
        pat = re.compile(
            r"(?<![\w])" + re.escape(name) + r"[ \t*_]*:[ \t*_]*(none|\$?[ \t]*\d+(?:\.\d+)?)(?![\w.])",
            re.IGNORECASE,
        )
        bm = pat.search(rest)
        if bm is None:
            raise ParseFailure("Bids", f"no bid entry for {name!r}")
        value = bm.group(1).lower()
        if value == "none":
            bids[name] = None
        else:
            try:
                bids[name] = Decimal(value.lstrip("$").strip())
            except InvalidOperation:
                raise ParseFailure("Bids", f"bad amount {value!r} for {name!r}") from None
    return prose, frozenset(chosen), bids


def parse_tarj(
    text: str,
    mode: str = "battery",
    items: Sequence[str] = (),
    *,
    strict_order: bool = False,
) -> TarjRecord:
    """Parse a model response into a :class:`TarjRecord`.

    Labels are matched case-insensitively and may appear in any order
    unless ``strict_order`` is set; ``canonical_order`` on the record says
    whether the response followed Thoughts, Action, Reflection, Journal.
    """
    if mode not in ("battery", "auction"):
        raise ValueError(f"unknown mode {mode!r}")
    if not isinstance(text, str):
        raise ParseFailure("Thoughts", "response is not text")
    sections, order = _split_sections(text)
    canonical = order == list(SECTIONS)
    if strict_order and not canonical:
        first_bad = next(a for a, b in zip(order, SECTIONS) if a != b)
        raise ParseFailure(first_bad, "sections out of order")

    parsed_action = chosen = bids = None
    if mode == "battery":
        action_text = _normalize(sections["Action"])
        if not action_text:
            raise ParseFailure("Action", "empty")
        parsed_action = action_from_text(action_text)
    else:
        prose, chosen, bids = _parse_auction_action(sections["Action"], items)
        action_text = _normalize(prose)

    return TarjRecord(
        thoughts=_normalize(sections["Thoughts"]),
        action_text=action_text,
        reflection=_normalize(sections["Reflection"]),
        journal=_normalize(sections["Journal"]),
        parsed_action=parsed_action,
        chosen_subset=chosen,
        bids=bids,
        canonical_order=canonical,
    )


def render_tarj(record: TarjRecord, items: Sequence[str] = ()) -> str:
    """Canonical text form of a record; ``parse_tarj`` inverts it."""
    lines = [f"Thoughts: {record.thoughts}", f"Action: {record.action_text}"]
    if record.bids is not None:
        ordered = [n for n in items if n in record.chosen_subset] if items else sorted(record.chosen_subset)
        lines.append("ChosenSubset: " + ", ".join(ordered))
        names = items or list(record.bids)
        for name in names:
            value = record.bids[name]
            lines.append(f"{name}: " + ("none" if value is None else str(value)))
    lines.append(f"Reflection: {record.reflection}")
    lines.append(f"Journal: {record.journal}")
    return "\n".join(lines) + "\n"
