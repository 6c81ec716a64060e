"""DP vs greedy on the default battery scenario.

Prints the DP value, Monte Carlo means for both policies on shared price
paths, and the per-day mean SoC, then writes the usual output directory.
"""

import argparse
from pathlib import Path

from genagent_energy import harness
from genagent_energy.dispatch import solve_dp

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "battery_default.json"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=str(CONFIG))
    parser.add_argument("--runs", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default="out/battery_baselines")
    args = parser.parse_args()

    cfg = harness.load_config(args.config, {"runs": args.runs, "seed": args.seed})
    values, _ = solve_dp(cfg.battery, cfg.prices)
    runset, series = harness.run_experiment(cfg)
    harness.write_outputs(runset, series, args.out, base_dir=Path(args.config).parent)

    soc0 = cfg.battery.initial_soc_kwh
    print(f"V[1][{soc0}] = ${float(values.value(1, soc0)) / 100:.3f}")
    for binding in cfg.agents:
        totals = [r.trajectories[binding.name].total_reward for r in runset.runs]
        print(f"{binding.name:>8}: mean reward ${sum(totals) / len(totals) / 100:.3f} over {len(totals)} runs")
    print("day  " + "  ".join(f"{b.name:>8}" for b in cfg.agents))
    for day in range(1, cfg.battery.horizon_days + 1):
        socs = [float(r["mean_soc"]) for r in series.rows if r["day"] == day]
        print(f"{day:>3}  " + "  ".join(f"{s:8.2f}" for s in socs))


if __name__ == "__main__":
    main()
