"""Two straightforward bidders with the shipped two-bidder valuations.

Reports the allocation frequencies, final-price range and the per-round
mean standing price for each product.
"""

import argparse
from pathlib import Path

from genagent_energy import harness

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "auction_two_bidder.json"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=str(CONFIG))
    parser.add_argument("--runs", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default="out/two_bidder_saa")
    args = parser.parse_args()

    cfg = harness.load_config(args.config, {"runs": args.runs, "seed": args.seed})
    runset, series = harness.run_experiment(cfg)
    harness.write_outputs(runset, series, args.out, base_dir=Path(args.config).parent)

    meta = series.metadata
    print(f"{cfg.runs} runs, {meta['natural_terminations']} natural terminations, "
          f"rounds {min(meta['rounds_used'])}-{max(meta['rounds_used'])}")
    for item, counts in meta["allocation_counts"].items():
        finals = sorted({str(r.outcome.prices[item]) for r in runset.runs if r.outcome})
        print(f"{item}: winners {counts}, final prices {finals}, mean {meta['mean_final_price'][item]:.2f}")
    print("round  item        mean   n")
    for row in series.rows:
        print(f"{row['round']:>5}  {row['item']:<10} {float(row['mean_bid']):5.2f}  {row['n']}")


if __name__ == "__main__":
    main()
