from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from genagent_energy.battery import DispatchAction
from genagent_energy.errors import AmbiguousAction, ParseFailure, UnknownItemName
from genagent_energy.tarj import TarjRecord, action_from_text, parse_tarj, render_tarj

ITEMS = ("Product A", "Product B")


def test_battery_basic():
    rec = parse_tarj("Thoughts: cheap\nAction: Charge 1 kWh\nReflection: ok\nJournal: bought")
    assert rec.parsed_action is DispatchAction.CHARGE
    assert (rec.thoughts, rec.journal) == ("cheap", "bought")
    assert rec.canonical_order


def test_case_insensitive_and_markdown_labels():
    rec = parse_tarj("**THOUGHTS:** x\n**action**: sell now\n- reflection: y\n## Journal: z")
    assert rec.parsed_action is DispatchAction.DISCHARGE


@pytest.mark.parametrize("text,action", [
    ("HOLD. I keep my energy.", DispatchAction.HOLD),
    ("Do nothing today", DispatchAction.HOLD),
    ("SERVE LOAD to keep the lights on", DispatchAction.SERVE_LOAD),
    ("I fully discharge the battery for the house", DispatchAction.SERVE_LOAD),
    ("DISCHARGE 1 kWh", DispatchAction.DISCHARGE),
    ("buy one unit", DispatchAction.CHARGE),
])
def test_action_keywords(text, action):
    assert action_from_text(text) is action


def test_conflicting_keywords():
    with pytest.raises(AmbiguousAction) as info:
        action_from_text("charge or maybe discharge")
    assert info.value.section == "Action"


def test_missing_section_names_it():
    with pytest.raises(ParseFailure) as info:
        parse_tarj("Thoughts: a\nAction: hold\nJournal: c")
    assert info.value.section == "Reflection"


def test_duplicate_section():
    with pytest.raises(ParseFailure):
        parse_tarj("Thoughts: a\nAction: hold\nAction: charge\nReflection: b\nJournal: c")


def test_order_flag():
    text = "Action: hold\nThoughts: a\nReflection: b\nJournal: c"
    assert not parse_tarj(text).canonical_order
    with pytest.raises(ParseFailure):
        parse_tarj(text, strict_order=True)


def test_no_action_keyword():
    with pytest.raises(ParseFailure):
        parse_tarj("Thoughts: a\nAction: whatever\nReflection: b\nJournal: c")


def test_auction_parse():
    text = (
        "Thoughts: t\nAction: demand B\nChosenSubset: B\n"
        "Product A: none\nProduct B: $3\nReflection: r\nJournal: j\n"
    )
    rec = parse_tarj(text, "auction", ITEMS)
    assert rec.chosen_subset == {"Product B"}
    assert rec.bids == {"Product A": None, "Product B": Decimal(3)}
    assert rec.action_text == "demand B"


def test_auction_empty_subset_and_unknown_item():
    ok = "Thoughts: t\nAction: pass\nChosenSubset:\nProduct A: none\nProduct B: none\nReflection: r\nJournal: j"
    assert parse_tarj(ok, "auction", ITEMS).chosen_subset == frozenset()
    bad = ok.replace("ChosenSubset:", "ChosenSubset: Product Q")
    with pytest.raises(UnknownItemName):
        parse_tarj(bad, "auction", ITEMS)


def test_auction_missing_bid_line():
    text = "Thoughts: t\nAction: a\nChosenSubset: Product A\nProduct A: 2\nReflection: r\nJournal: j"
    with pytest.raises(ParseFailure) as info:
        parse_tarj(text, "auction", ITEMS)
    assert info.value.section == "Bids"


words = st.text(alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd"), max_codepoint=0x24F),
                min_size=1, max_size=8)
# free text that cannot masquerade as a section label or an action keyword
prose = st.lists(words, min_size=1, max_size=8).map(" ".join).filter(
    lambda s: not any(k in s.lower() for k in ("thought", "action", "reflection", "journal", "chosen",
                                               "product", "none", "charg", "sell", "buy", "hold",
                                               "nothing", "serv"))
)


@settings(max_examples=250, deadline=None)
@given(t=prose, r=prose, j=prose, a=st.sampled_from(list(DispatchAction)), extra=prose)
def test_battery_round_trip(t, r, j, a, extra):
    verb = {"Charge": "Charge", "Discharge": "Discharge", "Hold": "Hold", "ServeLoad": "Serve load"}[a.value]
    rec = TarjRecord(t, f"{verb}. {extra}", r, j, a)
    back = parse_tarj(render_tarj(rec))
    assert back == rec


@settings(max_examples=250, deadline=None)
@given(t=prose, r=prose, j=prose, a=prose,
       bids=st.tuples(st.none() | st.integers(0, 999), st.none() | st.integers(0, 999)))
def test_auction_round_trip(t, r, j, a, bids):
    amounts = {n: None if b is None else Decimal(b) for n, b in zip(ITEMS, bids)}
    chosen = frozenset(n for n, b in amounts.items() if b is not None)
    rec = TarjRecord(t, a, r, j, None, chosen, amounts)
    back = parse_tarj(render_tarj(rec, ITEMS), "auction", ITEMS)
    assert back == rec
