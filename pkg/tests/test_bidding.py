import json
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from genagent_energy.auction import (
    AuctionState,
    Bid,
    BidderView,
    Item,
    ItemView,
    bidder_view,
    clear_round,
    run_auction,
)
from genagent_energy.bidding import (
    StraightforwardAgent,
    ValuationProfile,
    bundle_value,
    load_valuations,
    optimal_bundle_brute,
    straightforward_bids,
    straightforward_bundle,
)
from genagent_energy.errors import ConfigError, InstanceTooLarge, TooManyItems, UnknownItem

A, B = "Product A", "Product B"
BIDDER1 = ValuationProfile({A: 4, B: 6}, {(A, B): 10})
BIDDER2 = ValuationProfile({A: 8, B: 4}, {(A, B): 12})


def view(bidder="1", mins=None, holders=None):
    mins = mins or {}
    holders = holders or {}
    return BidderView(bidder, 1, tuple(
        ItemView(n, Decimal(0), holders.get(n), Decimal(mins[n]), Decimal(1), Decimal(0)) for n in mins
    ))


def test_bundle_values():
    assert bundle_value(BIDDER1, {A}) == 4
    assert bundle_value(BIDDER1, {B}) == 6
    assert bundle_value(BIDDER1, {A, B}) == 10
    assert bundle_value(BIDDER2, {A, B}) == 12
    assert bundle_value(BIDDER1, set()) == 0
    with pytest.raises(UnknownItem):
        bundle_value(BIDDER1, {"Product C"})


def test_profile_validation():
    with pytest.raises(ConfigError):
        ValuationProfile({A: -1})
    with pytest.raises(ConfigError):
        ValuationProfile({A: 1}, {(A,): 2})
    with pytest.raises(ConfigError):
        ValuationProfile({A: 1}, {(A, "X"): 2})


def test_bundle_examples():
    assert straightforward_bundle(BIDDER1, view(mins={A: 1, B: 1})).items == {A, B}
    assert straightforward_bundle(BIDDER1, view(mins={A: 1, B: 1})).expected_surplus == 8
    assert straightforward_bundle(BIDDER1, view(mins={A: 5, B: 7})).items == frozenset()
    zero = straightforward_bundle(BIDDER1, view(mins={A: 4, B: 6}))
    assert zero.items == {A, B} and zero.expected_surplus == 0
    assert straightforward_bundle(BIDDER1, view(mins={A: 4, B: 6}), prefer_larger=False).items == frozenset()


def test_bids_examples():
    both = straightforward_bundle(BIDDER1, view(mins={A: 2, B: 2}))
    assert straightforward_bids(both, view(mins={A: 2, B: 2})) == [Bid("1", A, 2), Bid("1", B, 2)]
    held = view(mins={A: 2, B: 2}, holders={A: "1"})
    assert straightforward_bids(straightforward_bundle(BIDDER1, held), held) == [Bid("1", B, 2)]
    empty = straightforward_bundle(BIDDER1, view(mins={A: 9, B: 9}))
    assert straightforward_bids(empty, view(mins={A: 9, B: 9})) == []


def test_lexicographic_tie():
    p = ValuationProfile({A: 3, B: 3})
    # a sub-additive bundle leaves {A} and {B} tied at surplus 1
    q = ValuationProfile({A: 3, B: 3}, {(A, B): 4})
    assert straightforward_bundle(q, view(mins={A: 2, B: 2})).items == {A}
    assert straightforward_bundle(p, view(mins={A: 2, B: 2})).items == {A, B}


def test_too_many_items():
    names = [f"I{i}" for i in range(21)]
    with pytest.raises(TooManyItems):
        straightforward_bundle(ValuationProfile({n: 1 for n in names}), view(mins={n: 1 for n in names}))


def test_brute_examples():
    one = ValuationProfile({A: 4})
    bundle, bids, surplus = optimal_bundle_brute(one, view(mins={A: 2}))
    assert bundle == {A} and bids == {A: 2} and surplus == 2
    bundle, bids, surplus = optimal_bundle_brute(ValuationProfile({A: 1}), view(mins={A: 2}))
    assert bundle == frozenset() and surplus == 0


def test_brute_limits():
    with pytest.raises(InstanceTooLarge):
        optimal_bundle_brute(BIDDER1, view(mins={A: 1, B: 1}), bid_grid_step=1, bid_cap=51)
    four = {f"I{i}": 1 for i in range(4)}
    with pytest.raises(InstanceTooLarge):
        optimal_bundle_brute(ValuationProfile(four), view(mins=four))


@settings(max_examples=300, deadline=None)
@given(
    k=st.integers(1, 3),
    data=st.data(),
)
def test_prop1_equivalence(k, data):
    names = ["X", "Y", "Z"][:k]
    values = {n: data.draw(st.integers(0, 10)) for n in names}
    mins = {n: data.draw(st.integers(0, 10)) for n in names}
    profile = ValuationProfile(values)
    v = view(mins=mins)
    chosen = straightforward_bundle(profile, v)
    _, _, brute = optimal_bundle_brute(profile, v)
    assert chosen.expected_surplus == brute >= 0
    assert all(b.amount == v.item(b.item).min_bid for b in straightforward_bids(chosen, v))


@settings(max_examples=150, deadline=None)
@given(data=st.data())
def test_monotone_demand(data):
    names = ["X", "Y", "Z"]
    profile = ValuationProfile({n: data.draw(st.integers(0, 10)) for n in names})
    mins = {n: data.draw(st.integers(0, 10)) for n in names}
    raised = dict(mins)
    target = data.draw(st.sampled_from(names))
    raised[target] += data.draw(st.integers(1, 5))
    before = straightforward_bundle(profile, view(mins=mins))
    after = straightforward_bundle(profile, view(mins=raised))
    assert after.expected_surplus <= before.expected_surplus
    if target not in before.items:
        assert target not in after.items


def test_valuation_file_round_trip(tmp_path):
    path = tmp_path / "v.json"
    path.write_text(json.dumps({"1": BIDDER1.to_json(), "2": BIDDER2.to_json()}))
    loaded = load_valuations(path)
    assert loaded["1"] == BIDDER1 and loaded["2"] == BIDDER2


def test_two_bidder_outcome_small_sample():
    items = (Item(A, 0, 1), Item(B, 0, 1))
    for seed in range(25):
        agents = [StraightforwardAgent("1", BIDDER1), StraightforwardAgent("2", BIDDER2)]
        out = run_auction(agents, items, rng=np.random.default_rng(seed))
        assert out.terminated_naturally
        assert out.allocation == {A: "2", B: "1"}
        # termination bound: ceil(max v / min delta) + 2
        assert out.rounds_used <= 8 + 2


def test_straightforward_agent_never_rebids_held_items():
    items = (Item(A, 0, 1), Item(B, 0, 1))
    state = AuctionState.start(items, ["1", "2"])
    state, _ = clear_round(state, [Bid("1", A, 1)], np.random.default_rng(0))
    bids = StraightforwardAgent("1", BIDDER1).bid(bidder_view(state, "1"))
    assert [b.item for b in bids] == [B]
