"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (the lines are repeated in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import filecmp
import itertools
import json
import math
import sys
import time
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from genagent_energy import harness  # noqa: E402
from genagent_energy.agents import LlmAuctionAgent, LlmBatteryAgent  # noqa: E402
from genagent_energy.auction import (  # noqa: E402
    AuctionState,
    Bid,
    BidderView,
    Item,
    ItemView,
    bidder_view,
    clear_round,
    min_bid_price,
    run_auction,
)
from genagent_energy.battery import BatteryConfig, DayState, DispatchAction, PriceModel  # noqa: E402
from genagent_energy.bidding import (  # noqa: E402
    StraightforwardAgent,
    ValuationProfile,
    load_valuations,
    optimal_bundle_brute,
    straightforward_bids,
    straightforward_bundle,
)
from genagent_energy.cli import main  # noqa: E402
from genagent_energy.dispatch import solve_dp  # noqa: E402
from genagent_energy.llm import LlmClient, ModelConfig, ScriptedBackend  # noqa: E402
from genagent_energy.prompts import AuctionObjective, Persona  # noqa: E402
from genagent_energy.tarj import TarjRecord, parse_tarj, render_tarj  # noqa: E402
from golden_cases import GOLDEN_DIR, cases  # noqa: E402
from oracles import tree_search_value  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
RESULTS: list[str] = []


def report(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({name}): {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# ---------------------------------------------------------------- 1


def test_criterion_1_dp_exactness():
    started = time.perf_counter()
    price_pairs = [(1000, 500), (700, 300), (5, 4), (2000, 1)]
    prob_pairs = [("0.5", "0.5"), ("0.2", "0.8"), ("0.9", "0.1")]
    checked = mismatches = 0
    for horizon, capacity, levels, probs in itertools.product(range(1, 5), range(1, 4), price_pairs, prob_pairs):
        model = PriceModel(levels, tuple(float(p) for p in probs))
        exact = [Fraction(p) for p in probs]
        for soc0 in range(capacity + 1):
            cfg = BatteryConfig(capacity_kwh=capacity, floor_kwh=0, step_kwh=1,
                                horizon_days=horizon, initial_soc_kwh=soc0)
            values, _ = solve_dp(cfg, model)
            checked += 1
            if values.value(1, soc0) != tree_search_value(levels, exact, capacity, 0, 1, horizon, soc0):
                mismatches += 1
    elapsed = time.perf_counter() - started
    report(1, "DP exactness", mismatches == 0 and elapsed < 5,
           f"{checked} configs, {mismatches} mismatches, {elapsed:.2f}s (limit 5s)")


# ---------------------------------------------------------------- 2


def test_criterion_2_dp_dominance():
    started = time.perf_counter()
    raw = {
        "experiment": "battery",
        "runs": 10_000,
        "seed": 20240601,
        "battery": {"capacity_kwh": 10, "floor_kwh": 0, "step_kwh": 1, "horizon_days": 20, "initial_soc_kwh": 5},
        "prices": {"levels": [10, 5], "probabilities": [0.5, 0.5]},
        "agents": [
            {"name": "DP", "kind": "dp", "blackout": False},
            {"name": "Greedy", "kind": "greedy", "blackout": False},
        ],
    }
    cfg = harness.config_from_dict(raw)
    runset, _ = harness.run_experiment(cfg)
    dp = Fraction(sum(r.trajectories["DP"].total_reward for r in runset.runs), len(runset.runs))
    greedy = Fraction(sum(r.trajectories["Greedy"].total_reward for r in runset.runs), len(runset.runs))
    values, _ = solve_dp(cfg.battery, cfg.prices)
    v = values.value(1, cfg.battery.initial_soc_kwh)
    rel = abs(dp - v) / v
    elapsed = time.perf_counter() - started
    ok = dp >= greedy and rel <= Fraction(1, 100) and elapsed < 30
    report(2, "DP dominance", ok,
           f"mean DP ${float(dp) / 100:.3f} >= mean greedy ${float(greedy) / 100:.3f}; "
           f"V[1][5] ${float(v) / 100:.3f}, rel. gap {float(rel):.4%} (limit 1%); {elapsed:.1f}s (limit 30s)")


# ---------------------------------------------------------------- 3


def _random_view(rng, items) -> BidderView:
    """View for bidder 1 with r drawn uniformly from 0..10 on every item."""
    views = []
    for name in items:
        r = int(rng.integers(0, 11))
        holder = [None, "1", "2"][int(rng.integers(3))]
        if holder != "1" and r == 0:
            holder = "1"  # a challenger's minimum is at least one increment
        price = r if holder == "1" else r - 1
        views.append(ItemView(name, Decimal(price), holder, Decimal(r), Decimal(1),
                              Decimal(price if holder is None else 0)))
    return BidderView("1", 1, tuple(views))


def test_criterion_3_minimum_bid_optimality():
    started = time.perf_counter()
    rng = np.random.default_rng(1)
    names = ("X", "Y", "Z")
    surplus_mismatch = bid_mismatch = 0
    for _ in range(1000):
        items = names[: int(rng.integers(1, 4))]
        profile = ValuationProfile({n: int(rng.integers(0, 11)) for n in items})
        view = _random_view(rng, items)
        chosen = straightforward_bundle(profile, view)
        _, _, brute = optimal_bundle_brute(profile, view, bid_grid_step=1, bid_cap=10)
        surplus_mismatch += chosen.expected_surplus != brute
        bid_mismatch += sum(b.amount != view.item(b.item).min_bid for b in straightforward_bids(chosen, view))
    elapsed = time.perf_counter() - started
    report(3, "minimum-bid optimality", surplus_mismatch == 0 and bid_mismatch == 0 and elapsed < 10,
           f"1000 instances, {surplus_mismatch} surplus mismatches, {bid_mismatch} off-minimum bids, "
           f"{elapsed:.2f}s (limit 10s)")


# ---------------------------------------------------------------- 4


def test_criterion_4_two_bidder_outcome():
    started = time.perf_counter()
    profiles = load_valuations(CONFIGS / "two_bidder_valuations.json")
    items = (Item("Product A", 0, 1), Item("Product B", 0, 1))
    bad = []
    rounds, prices = [], set()
    for seed in range(1000):
        agents = [StraightforwardAgent("1", profiles["1"]), StraightforwardAgent("2", profiles["2"])]
        out = run_auction(agents, items, max_rounds=100, rng=np.random.default_rng(seed))
        rounds.append(out.rounds_used)
        prices.update(out.prices.values())
        ok = (
            out.terminated_naturally
            and out.rounds_used <= 14
            and out.allocation == {"Product A": "2", "Product B": "1"}
            and all(4 <= p <= 5 for p in out.prices.values())
        )
        if not ok:
            bad.append(seed)
    elapsed = time.perf_counter() - started
    report(4, "SAA two-bidder outcome", not bad and elapsed < 10,
           f"1000 seeds, {len(bad)} violations, rounds {min(rounds)}-{max(rounds)} (limit 14), "
           f"final prices seen {sorted(str(p) for p in prices)}, {elapsed:.2f}s (limit 10s)")


# ---------------------------------------------------------------- 5


class _RandomBidder:
    def __init__(self, bidder, rng):
        self.bidder = bidder
        self.rng = rng

    def bid(self, view):
        out = []
        for it in view.items:
            if self.rng.random() < 0.6:
                amount = max(Decimal(0), it.min_bid + int(self.rng.integers(-2, 3)))
                out.append(Bid(self.bidder, it.name, amount))
        return out


def test_criterion_5_mechanism_invariants():
    started = time.perf_counter()
    violations = {"monotonicity": 0, "incumbent privilege": 0, "retention": 0}
    rng = np.random.default_rng(5)
    for trial in range(300):
        n_bidders = int(rng.integers(1, 5))
        items = tuple(Item(f"I{k}", int(rng.integers(0, 3)), int(rng.integers(1, 3)))
                      for k in range(int(rng.integers(1, 4))))
        agents = [_RandomBidder(str(b), np.random.default_rng(trial * 10 + b)) for b in range(1, n_bidders + 1)]
        out = run_auction(agents, items, max_rounds=20, rng=np.random.default_rng(trial))
        for prev, cur, res in zip(out.states, out.states[1:], out.rounds):
            for k, it in enumerate(items):
                old, new, r = prev.standing[k], cur.standing[k], res.items[k]
                violations["monotonicity"] += new.price < old.price
                violations["retention"] += (not r.accepted) and new != old
                for bid in r.accepted:
                    # a bid of exactly H is valid only from the incumbent
                    violations["incumbent privilege"] += bid.amount == old.price and bid.bidder != old.bidder
                for bid, _ in r.rejected:
                    violations["incumbent privilege"] += bid.amount >= min_bid_price(prev, bid.bidder, it.name)
    # direct incumbent-privilege probe at every reachable H
    for h in range(1, 30):
        s, _ = clear_round(AuctionState.start((Item("A", 0, 1),), ["1", "2"]), [Bid("1", "A", h)], rng)
        keep = clear_round(s, [Bid("1", "A", h)], rng)[1].item("A")
        challenge = clear_round(s, [Bid("2", "A", h)], rng)[1].item("A")
        violations["incumbent privilege"] += not keep.accepted or bool(challenge.accepted)

    n = 10_000
    tol = 3 * math.sqrt(1 / (4 * n))
    worst = 0.0
    fair = True
    for m in (2, 3, 4):
        bidders = [str(b) for b in range(1, m + 1)]
        s = AuctionState.start((Item("A", 0, 1),), bidders)
        tie_rng = np.random.default_rng(100 + m)
        counts = dict.fromkeys(bidders, 0)
        bids = [Bid(b, "A", 1) for b in bidders]
        for _ in range(n):
            counts[clear_round(s, bids, tie_rng)[0].high_bidder("A")] += 1
        dev = max(abs(c / n - 1 / m) for c in counts.values())
        worst = max(worst, dev)
        fair &= dev <= tol
    elapsed = time.perf_counter() - started
    ok = not any(violations.values()) and fair and elapsed < 60
    report(5, "mechanism invariants", ok,
           f"violations {violations}; worst tie deviation {worst:.4f} (tol {tol:.4f}, n={n}); "
           f"{elapsed:.1f}s (limit 60s)")


# ---------------------------------------------------------------- 6

_WORDS = ("price", "grid", "reserve", "day", "plan", "risk", "value", "bundle", "round", "note",
          "steady", "later", "cheap", "high", "low", "keep", "limit", "fair", "gain", "loss")


def _sentence(rng) -> str:
    return " ".join(rng.choice(_WORDS, size=int(rng.integers(1, 12))))


def _generated_records(rng, count):
    items = ("Product A", "Product B", "Product C")
    verbs = {DispatchAction.CHARGE: "CHARGE", DispatchAction.DISCHARGE: "DISCHARGE",
             DispatchAction.HOLD: "HOLD", DispatchAction.SERVE_LOAD: "SERVE LOAD"}
    for i in range(count):
        if i % 2 == 0:
            action = list(verbs)[int(rng.integers(4))]
            yield TarjRecord(_sentence(rng), f"{verbs[action]}. {_sentence(rng)}", _sentence(rng),
                             _sentence(rng), action), (), "battery"
        else:
            bids = {}
            for name in items:
                bids[name] = None if rng.random() < 0.3 else Decimal(int(rng.integers(0, 500))) / (
                    1 if rng.random() < 0.7 else 4)
            chosen = frozenset(n for n, b in bids.items() if b is not None)
            yield TarjRecord(_sentence(rng), _sentence(rng), _sentence(rng), _sentence(rng),
                             None, chosen, bids), items, "auction"


def _always_malformed_client():
    return LlmClient(ModelConfig(), ScriptedBackend(["I would rather not say."], cycle=True), sleep=lambda s: None)


def test_criterion_6_tarj_pipeline():
    rng = np.random.default_rng(6)
    preserved = 0
    for record, items, mode in _generated_records(rng, 500):
        back = parse_tarj(render_tarj(record, items), mode, items)
        preserved += back == record

    golden = cases()
    prompt_files = [n for n in golden if n != "cli_help.txt"]
    golden_ok = [n for n in prompt_files if golden[n] == (GOLDEN_DIR / n).read_text(encoding="utf-8")]

    battery_client = _always_malformed_client()
    battery_agent = LlmBatteryAgent("probe", Persona.builtin("Thinker"), battery_client, BatteryConfig(), PriceModel())
    action = battery_agent.act(DayState(day=1, price=500, soc=5))
    auction_client = _always_malformed_client()
    items = (Item("Product A", 0, 1), Item("Product B", 0, 1))
    auction_agent = LlmAuctionAgent("1", AuctionObjective.load("rule_centric"), auction_client,
                                    ValuationProfile({"Product A": 4, "Product B": 6}))
    bids = auction_agent.bid(bidder_view(AuctionState.start(items, ["1"]), "1"))
    fallback_ok = (action is DispatchAction.HOLD and len(battery_client.transcript) == 3
                   and bids == [] and len(auction_client.transcript) == 3)

    ok = preserved == 500 and len(golden_ok) == len(prompt_files) == 4 and fallback_ok
    report(6, "TARJ pipeline", ok,
           f"round-trip {preserved}/500; golden prompts {len(golden_ok)}/{len(prompt_files)}; "
           f"fallback {action.value} / {len(bids)} bids after "
           f"{len(battery_client.transcript)}/{len(auction_client.transcript)} attempts")


# ---------------------------------------------------------------- 7


def _identical_trees(a: Path, b: Path) -> bool:
    def walk(c):
        if c.left_only or c.right_only or c.funny_files:
            return False
        _, mismatch, errors = filecmp.cmpfiles(c.left, c.right, c.common_files, shallow=False)
        return not mismatch and not errors and all(walk(s) for s in c.subdirs.values())

    return walk(filecmp.dircmp(a, b, ignore=["manifest.json"]))


def test_criterion_7_end_to_end_determinism(tmp_path):
    started = time.perf_counter()
    checks = {}
    for command, config in (("battery-run", "battery_personas_scripted.json"),
                            ("auction-run", "auction_two_bidder_scripted.json")):
        outs = []
        for tag, par in (("p1a", 1), ("p1b", 1), ("p8", 8)):
            out = tmp_path / f"{command}-{tag}"
            code = main([command, "--config", str(CONFIGS / config), "--seed", "7",
                         "--parallelism", str(par), "--out", str(out)])
            assert code == 0
            outs.append(out)
        checks[command] = _identical_trees(outs[0], outs[1]) and _identical_trees(outs[0], outs[2])
    elapsed = time.perf_counter() - started
    report(7, "end-to-end determinism", all(checks.values()),
           f"identical outputs across runs and parallelism 1/8: {checks}; {elapsed:.1f}s")


# ---------------------------------------------------------------- 8


def test_criterion_8_behavioral_pattern(tmp_path):
    out = tmp_path / "icl"
    assert main(["battery-run", "--config", str(CONFIGS / "battery_icl_pattern.json"), "--out", str(out)]) == 0
    series = harness.series_from_json(json.loads((out / "aggregate.json").read_text()))
    rows = {r["day"]: r for r in series.rows if r["condition"] == "icl-blackout"}
    horizon = max(rows)
    day10, terminal = rows[10]["mean_soc"], rows[horizon]["mean_soc"]
    ok = day10 == 0 and terminal >= 2 and series.metadata["incidents"] == 0
    report(8, "behavioral-pattern harness", ok,
           f"day-10 mean SoC {day10}, terminal (day {horizon}) mean SoC {terminal} (needs >= 2), "
           f"{series.metadata['runs']} runs")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
