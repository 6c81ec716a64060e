"""Command-line entry point.

Flag values override the corresponding config entries; the merged config
is what gets hashed and written to the run manifest.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .battery import BatteryConfig, PriceModel
from .bidding import load_valuations
from .dispatch import solve_dp
from .errors import ConfigError, TestbedError

log = logging.getLogger("genagent_energy")

HELP_WIDTH = 80


def _formatter(prog):
    return argparse.HelpFormatter(prog, width=HELP_WIDTH)


class UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(self, message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="genagent-energy",
        description="Battery-dispatch and SAA testbed for baseline and LLM-backed agents.",
        formatter_class=_formatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug output to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("dp-solve", help="solve the battery DP and write value/policy tables",
                       formatter_class=_formatter)
    p.add_argument("--config", required=True, help="battery experiment or scenario JSON")
    p.add_argument("--out", required=True, help="output directory")

    for name, text in (("battery-run", "run a battery Monte Carlo experiment"),
                       ("auction-run", "run an SAA Monte Carlo experiment")):
        p = sub.add_parser(name, help=text, formatter_class=_formatter)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--runs", type=int, help="number of Monte Carlo runs (overrides config)")
        p.add_argument("--backend", choices=sorted(harness.BACKENDS), help="LLM backend (overrides config)")
        p.add_argument("--script", help="scripted-backend response file")
        p.add_argument("--replay-from", help="output directory of a recorded run to replay")
        p.add_argument("--parallelism", type=int, help="worker threads for runs")

    p = sub.add_parser("validate-config", help="check config files without running them",
                       formatter_class=_formatter)
    p.add_argument("paths", nargs="+", help="config, valuation or script files")

    p = sub.add_parser("export", help="re-export an aggregate from a run directory",
                       formatter_class=_formatter)
    p.add_argument("--from", dest="source", required=True, help="run output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", required=True, help="output file or directory")

    p = sub.add_parser("replay", help="re-run an experiment from its recorded transcripts",
                       formatter_class=_formatter)
    p.add_argument("--from", dest="source", required=True, help="recorded run output directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--parallelism", type=int, help="worker threads for runs")
    return parser


def _battery_scenario(path: Path) -> tuple[BatteryConfig, PriceModel]:
    raw = json.loads(path.read_text())
    prices = raw.get("prices", {"levels": [10, 5], "probabilities": [0.5, 0.5]})
    return BatteryConfig(**raw.get("battery", {})), PriceModel.from_dollars(prices["levels"], prices["probabilities"])


def cmd_dp_solve(args) -> int:
    config, model = _battery_scenario(Path(args.config))
    values, policy = solve_dp(config, model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "value_table.json").write_text(json.dumps(values.to_json(), indent=2) + "\n")
    (out / "policy_table.json").write_text(json.dumps(policy.to_json(), indent=2) + "\n")
    print(f"V[1][{config.initial_soc_kwh}] = ${float(values.value(1, config.initial_soc_kwh)) / 100:.4f}",
          file=sys.stderr)
    return 0


def cmd_run(args, parser) -> int:
    overrides = {"seed": args.seed, "runs": args.runs, "parallelism": args.parallelism}
    backend = {"kind": args.backend, "script": args.script, "replay_from": args.replay_from}
    if any(v is not None for v in backend.values()):
        # paths given on the command line are relative to the working directory
        for key in ("script", "replay_from"):
            if backend[key] is not None:
                backend[key] = str(Path(backend[key]).resolve())
        overrides["backend"] = backend
    config_path = Path(args.config)
    if args.backend == "scripted" and args.script is None:
        raw = json.loads(config_path.read_text()) if config_path.exists() else {}
        if not (raw.get("backend") or {}).get("script"):
            raise UsageError(parser, "--backend scripted requires --script (or backend.script in the config)")
    if args.backend == "replay" and args.replay_from is None:
        raise UsageError(parser, "--backend replay requires --replay-from")
    cfg = harness.load_config(config_path, overrides)
    expected = "battery" if args.command == "battery-run" else "auction"
    if cfg.experiment != expected:
        raise ConfigError(f"{args.command} needs a {expected} config, got {cfg.experiment!r}")
    print(f"running {cfg.runs} {cfg.experiment} runs (seed {cfg.seed}, backend {cfg.backend.kind})",
          file=sys.stderr)
    runset, series = harness.run_experiment(cfg)
    harness.write_outputs(runset, series, args.out, base_dir=config_path.parent)
    failed = sum(1 for r in runset.runs if r.failures)
    print(f"done: {len(runset.runs)} runs, {failed} with failures, "
          f"{series.metadata['incidents']} parse incidents -> {args.out}", file=sys.stderr)
    return 0


def _validate_one(path: Path) -> str:
    raw = json.loads(path.read_text())
    if isinstance(raw, dict) and "experiment" in raw:
        cfg = harness.config_from_dict(raw, path.parent)
        return f"{cfg.experiment} experiment, {len(cfg.agents)} agents, {cfg.runs} runs"
    if isinstance(raw, dict) and ("responses" in raw or "default" in raw or "agents" in raw):
        return "LLM response script"
    if isinstance(raw, list):
        return "LLM response script"
    if isinstance(raw, dict) and "battery" in raw:
        config, _ = _battery_scenario(path)
        return f"battery scenario, horizon {config.horizon_days}"
    if isinstance(raw, dict) and "examples" in raw:
        from .prompts import IclExampleSet
        return f"ICL example set, {len(IclExampleSet.from_json(raw).examples)} examples"
    profiles = load_valuations(path)
    return f"valuation file, {len(profiles)} bidders"


def cmd_validate(args) -> int:
    status = 0
    for name in args.paths:
        path = Path(name)
        try:
            print(f"ok: {path}: {_validate_one(path)}")
        except (TestbedError, ValueError, KeyError, TypeError, OSError) as exc:
            print(f"invalid: {path}: {exc}", file=sys.stderr)
            status = 1
    return status


def cmd_export(args) -> int:
    source = Path(args.source) / "aggregate.json"
    try:
        data = json.loads(source.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {source}: {exc}") from exc
    path = harness.export(harness.series_from_json(data), args.format, args.out)
    print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_replay(args) -> int:
    source = Path(args.source)
    manifest = json.loads((source / "manifest.json").read_text())
    raw = harness.merge_overrides(
        manifest["config"],
        {"backend": {"kind": "replay", "replay_from": str(source.resolve())},
         "parallelism": args.parallelism},
    )
    cfg = harness.config_from_dict(raw, manifest.get("base_dir", "."))
    runset, series = harness.run_experiment(cfg)
    harness.write_outputs(runset, series, args.out, base_dir=manifest.get("base_dir", "."))
    print(f"replayed {len(runset.runs)} runs -> {args.out}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}\n", file=sys.stderr)
        print(exc.parser.format_help(), file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "dp-solve":
            return cmd_dp_solve(args)
        if args.command in ("battery-run", "auction-run"):
            sub = parser._subparsers._group_actions[0].choices[args.command]
            return cmd_run(args, sub)
        if args.command == "validate-config":
            return cmd_validate(args)
        if args.command == "export":
            return cmd_export(args)
        return cmd_replay(args)
    except UsageError as exc:
        print(f"error: {exc}\n", file=sys.stderr)
        print(exc.parser.format_help(), file=sys.stderr)
        return 2
    except (TestbedError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
