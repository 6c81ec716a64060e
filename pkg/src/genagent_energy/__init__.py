"""Testbed for battery dispatch and simultaneous ascending auctions with
baseline and LLM-backed agents."""

from .auction import (
    AuctionOutcome,
    AuctionState,
    Bid,
    BidderView,
    Item,
    RoundResult,
    bidder_view,
    clear_round,
    is_terminated,
    min_bid_price,
    run_auction,
)
from .battery import (
    BatteryConfig,
    DayState,
    DispatchAction,
    Intervention,
    PriceModel,
    sample_price,
    step,
    terminal_settlement,
)
from .bidding import (
    ChosenBundle,
    StraightforwardAgent,
    ValuationProfile,
    bundle_value,
    optimal_bundle_brute,
    straightforward_bids,
    straightforward_bundle,
)
from .dispatch import PolicyTable, ValueTable, dp_action, greedy_action, simulate_policy, solve_dp

__version__ = "0.1.0"
