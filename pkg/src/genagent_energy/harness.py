"""Monte Carlo orchestration, aggregation and export.

Every run index gets its own child seed derived from the master seed, its
own agents, memories and LLM clients, so runs can execute in a thread
pool and still aggregate in deterministic run order. Within a battery run
all agents face the same price path.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import logging
import math
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .agents import LlmAuctionAgent, LlmBatteryAgent
from .auction import AuctionOutcome, Item, money_json, run_auction, to_money
from .battery import BatteryConfig, Intervention, PriceModel, sample_price_path
from .bidding import StraightforwardAgent, ValuationProfile, load_valuations
from .dispatch import Trajectory, dp_policy, greedy_policy, simulate_policy, solve_dp
from .errors import ConfigError, EmptySeries, IoFailure
from .llm import HttpBackend, LlmClient, ModelConfig, ReplayBackend, ScriptedBackend, TokenBucket
from .prompts import AuctionObjective, IclExampleSet, ObjectiveKind, Persona

log = logging.getLogger(__name__)

BATTERY_KINDS = {"dp", "greedy", "llm"}
AUCTION_KINDS = {"straightforward", "llm"}
BACKENDS = {"live", "scripted", "replay"}
# execution settings, kept out of the design hash (backend is recorded in the manifest)
EXECUTION_KEYS = ("parallelism", "backend")

BATTERY_COLUMNS = ("day", "persona", "condition", "mean_soc", "sd_soc", "mean_reward")
AUCTION_COLUMNS = ("round", "item", "agent_type", "mean_bid", "sd_bid")


def derive_seed(master_seed: int, run_index: int) -> int:
    """Child seed for one run; a pure function of its two arguments."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(run_index),))
    hi, lo = (int(x) for x in ss.generate_state(2, dtype=np.uint32))
    return (hi << 32) | lo


# ---------------------------------------------------------------- configs


@dataclass(frozen=True)
class AgentBinding:
    name: str
    kind: str
    condition: str = "baseline"
    persona: Persona | None = None
    icl: IclExampleSet | None = None
    blackout: bool = True
    bidder: str | None = None
    objective: AuctionObjective | None = None


@dataclass(frozen=True)
class BackendSpec:
    kind: str = "scripted"
    script: Path | None = None
    replay_from: Path | None = None
    model: ModelConfig = field(default_factory=ModelConfig)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    runs: int
    seed: int
    agents: tuple[AgentBinding, ...]
    backend: BackendSpec
    raw: Mapping[str, Any]
    parallelism: int = 1
    battery: BatteryConfig | None = None
    prices: PriceModel | None = None
    blackout_days: frozenset = frozenset()
    items: tuple[Item, ...] = ()
    valuations: Mapping[str, ValuationProfile] = field(default_factory=dict)
    max_rounds: int = 100
    label: str = ""
    prefer_larger: bool = True

    @property
    def needs_llm(self) -> bool:
        return any(a.kind == "llm" for a in self.agents)

    def config_hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: Mapping) -> str:
    payload = {k: v for k, v in raw.items() if k not in EXECUTION_KEYS}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _resolve(base: Path, value) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def _persona(spec: Mapping) -> Persona:
    name = spec.get("persona", spec["name"])
    if "persona_description" in spec:
        return Persona(name, spec["persona_description"])
    return Persona.builtin(name)


def _icl(spec: Mapping, base: Path) -> IclExampleSet | None:
    source = spec.get("icl")
    if source in (None, False, "none"):
        return None
    if source == "builtin:blackout":
        return IclExampleSet.builtin_blackout()
    return IclExampleSet.load(_resolve(base, source))


def _backend(raw: Mapping, base: Path) -> BackendSpec:
    spec = raw.get("backend", {}) or {}
    kind = spec.get("kind", "scripted")
    if kind not in BACKENDS:
        raise ConfigError(f"unknown backend {kind!r}")
    return BackendSpec(
        kind=kind,
        script=_resolve(base, spec.get("script")),
        replay_from=_resolve(base, spec.get("replay_from")),
        model=ModelConfig.from_json(spec.get("model", {})),
    )


def config_from_dict(raw: Mapping, base_dir=".") -> ExperimentConfig:
    """Validate and bind a JSON experiment config.

    Relative file references resolve against ``base_dir``.
    """
    base = Path(base_dir)
    raw = copy.deepcopy(dict(raw))
    kind = raw.get("experiment")
    if kind not in ("battery", "auction"):
        raise ConfigError("'experiment' must be 'battery' or 'auction'")
    runs = int(raw.get("runs", 40 if kind == "battery" else 30))
    if runs < 1:
        raise ConfigError("runs must be at least 1")
    seed = int(raw.get("seed", 0))
    parallelism = int(raw.get("parallelism", 1))
    if parallelism < 1:
        raise ConfigError("parallelism must be at least 1")
    agents_raw = raw.get("agents") or []
    if not agents_raw:
        raise ConfigError("config needs at least one agent")
    names = [a.get("name") for a in agents_raw]
    if None in names or len(set(names)) != len(names):
        raise ConfigError("every agent needs a unique name")

    try:
        backend = _backend(raw, base)
        if kind == "battery":
            return _battery_config(raw, base, runs, seed, parallelism, backend, agents_raw)
        return _auction_config(raw, base, runs, seed, parallelism, backend, agents_raw)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config: {exc!r}") from exc


def _battery_config(raw, base, runs, seed, parallelism, backend, agents_raw) -> ExperimentConfig:
    battery = BatteryConfig(**raw.get("battery", {}))
    price_spec = raw.get("prices", {"levels": [10, 5], "probabilities": [0.5, 0.5]})
    prices = PriceModel.from_dollars(price_spec["levels"], price_spec["probabilities"])
    blackout = Intervention(frozenset(raw.get("blackout_days", [10])))
    blackout.validate(battery)
    bindings = []
    for spec in agents_raw:
        kind = spec.get("kind")
        if kind not in BATTERY_KINDS:
            raise ConfigError(f"agent {spec['name']!r}: unknown battery agent kind {kind!r}")
        bindings.append(
            AgentBinding(
                name=spec["name"],
                kind=kind,
                condition=spec.get("condition", "baseline"),
                persona=_persona(spec) if kind == "llm" else None,
                icl=_icl(spec, base) if kind == "llm" else None,
                blackout=bool(spec.get("blackout", True)),
            )
        )
    cfg = ExperimentConfig(
        experiment="battery", runs=runs, seed=seed, agents=tuple(bindings), backend=backend,
        raw=raw, parallelism=parallelism, battery=battery, prices=prices,
        blackout_days=blackout.blackout_days,
    )
    _check_backend(cfg)
    return cfg


def _auction_config(raw, base, runs, seed, parallelism, backend, agents_raw) -> ExperimentConfig:
    items = tuple(
        Item(it["name"], to_money(it.get("start_price", 0)), to_money(it.get("increment", 1)))
        for it in raw["items"]
    )
    if not items:
        raise ConfigError("auction needs at least one item")
    vals = raw["valuations"]
    if isinstance(vals, str):
        valuations = load_valuations(_resolve(base, vals))
    else:
        valuations = {str(k): ValuationProfile.from_json(v) for k, v in vals.items()}
    item_names = {it.name for it in items}
    bindings = []
    for spec in agents_raw:
        kind = spec.get("kind")
        if kind not in AUCTION_KINDS:
            raise ConfigError(f"agent {spec['name']!r}: unknown auction agent kind {kind!r}")
        bidder = str(spec.get("bidder", spec["name"]))
        if bidder not in valuations:
            raise ConfigError(f"no valuations for bidder {bidder!r}")
        unknown = set(valuations[bidder].item_values) - item_names
        if unknown:
            raise ConfigError(f"bidder {bidder!r} values unknown items {sorted(unknown)}")
        objective = None
        if kind == "llm":
            objective = AuctionObjective.load(spec.get("objective", ObjectiveKind.MYOPIC_PROFIT.value))
        bindings.append(AgentBinding(name=spec["name"], kind=kind, bidder=bidder, objective=objective,
                                     condition=spec.get("condition", "baseline")))
    bidders = [b.bidder for b in bindings]
    if len(set(bidders)) != len(bidders):
        raise ConfigError("each bidder may appear only once")
    label = raw.get("label") or "+".join(
        sorted({b.objective.kind.value if b.objective else b.kind for b in bindings})
    )
    max_rounds = int(raw.get("max_rounds", 100))
    if max_rounds < 1:
        raise ConfigError("max_rounds must be at least 1")
    cfg = ExperimentConfig(
        experiment="auction", runs=runs, seed=seed, agents=tuple(bindings), backend=backend,
        raw=raw, parallelism=parallelism, items=items, valuations=valuations,
        max_rounds=max_rounds, label=label, prefer_larger=bool(raw.get("prefer_larger", True)),
    )
    _check_backend(cfg)
    return cfg


def _check_backend(cfg: ExperimentConfig) -> None:
    if not cfg.needs_llm:
        return
    if cfg.backend.kind == "scripted" and cfg.backend.script is None:
        raise ConfigError("scripted backend needs a script file")
    if cfg.backend.kind == "replay" and cfg.backend.replay_from is None:
        raise ConfigError("replay backend needs a recorded output directory")


def load_config(path, overrides: Mapping | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if overrides:
        raw = merge_overrides(raw, overrides)
    return config_from_dict(raw, path.parent)


def merge_overrides(raw: Mapping, overrides: Mapping) -> dict:
    """Flags win over config values; ``backend`` merges key by key."""
    merged = copy.deepcopy(dict(raw))
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "backend":
            merged["backend"] = {**merged.get("backend", {}), **{k: v for k, v in value.items() if v is not None}}
        else:
            merged[key] = value
    return merged


# ---------------------------------------------------------------- clients


class ClientFactory:
    def __init__(self, spec: BackendSpec):
        self.spec = spec
        self.script = None
        self.limiter = None
        self.http = None
        if spec.kind == "scripted" and spec.script is not None:
            try:
                self.script = json.loads(Path(spec.script).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read script {spec.script}: {exc}") from exc
        if spec.kind == "live":
            self.http = HttpBackend(spec.model)
            if spec.model.requests_per_minute:
                self.limiter = TokenBucket(spec.model.requests_per_minute)

    def _script_for(self, run_index: int, agent: str):
        script = self.script
        if isinstance(script, list):
            return {"mode": "ordered", "responses": script}
        if "responses" in script:
            # a bare spec serves every agent
            return script
        per_run = script.get("runs", {}).get(str(run_index), {})
        for candidate in (per_run.get(agent), script.get("agents", {}).get(agent), script.get("default")):
            if candidate is not None:
                return candidate if isinstance(candidate, Mapping) else {"responses": candidate}
        raise ConfigError(f"script has no responses for agent {agent!r}")

    def make(self, run_index: int, agent: str) -> LlmClient:
        if self.spec.kind == "scripted":
            backend = ScriptedBackend.from_spec(self._script_for(run_index, agent))
        elif self.spec.kind == "replay":
            path = Path(self.spec.replay_from) / "runs" / str(run_index) / "transcript.jsonl"
            backend = ReplayBackend.from_transcript(path, tag=agent)
        else:
            backend = self.http
        live = self.spec.kind == "live"
        return LlmClient(
            self.spec.model,
            backend,
            tag=agent,
            rate_limiter=self.limiter,
            sleep=time.sleep if live else (lambda _s: None),
        )


# ---------------------------------------------------------------- runs


@dataclass
class RunResult:
    index: int
    seed: int
    trajectories: dict[str, Trajectory] = field(default_factory=dict)
    outcome: AuctionOutcome | None = None
    records: list[dict] = field(default_factory=list)
    exchanges: list[dict] = field(default_factory=list)
    incidents: int = 0
    failures: dict[str, str] = field(default_factory=dict)
    elapsed_s: float = 0.0

    @property
    def flagged(self) -> bool:
        return self.incidents > 0


@dataclass
class RunSet:
    config: ExperimentConfig
    runs: list[RunResult]
    elapsed_s: float = 0.0


def _battery_run(cfg: ExperimentConfig, index: int, clients: ClientFactory | None, dp_table) -> RunResult:
    seed = derive_seed(cfg.seed, index)
    result = RunResult(index=index, seed=seed)
    started = time.perf_counter()
    prices = sample_price_path(cfg.prices, cfg.battery.horizon_days, np.random.default_rng(seed))
    blackout = Intervention(cfg.blackout_days)
    for binding in cfg.agents:
        intervention = blackout if binding.blackout else Intervention.none()
        client = None
        try:
            if binding.kind == "dp":
                traj = simulate_policy(dp_policy(dp_table), cfg.battery, cfg.prices, intervention, prices=prices)
            elif binding.kind == "greedy":
                traj = simulate_policy(greedy_policy(cfg.battery, cfg.prices), cfg.battery, cfg.prices,
                                       intervention, prices=prices)
            else:
                client = clients.make(index, binding.name)
                agent = LlmBatteryAgent(binding.name, binding.persona, client, cfg.battery, cfg.prices,
                                        icl=binding.icl)
                try:
                    traj = simulate_policy(agent.act, cfg.battery, cfg.prices, intervention, prices=prices,
                                           blackout_aware=True, observer=agent.observe)
                finally:
                    result.records.extend({"kind": "tarj", "agent": binding.name, **r} for r in agent.records)
                    result.incidents += len(agent.incidents)
            result.trajectories[binding.name] = traj
        except Exception as exc:  # isolate: one agent's failure must not sink the run set
            log.error("run %d agent %s failed: %s", index, binding.name, exc)
            result.failures[binding.name] = f"{type(exc).__name__}: {exc}"
        finally:
            if client is not None:
                result.exchanges.extend({"kind": "exchange", **e.to_json(include_timing=False)}
                                        for e in client.transcript)
    result.elapsed_s = time.perf_counter() - started
    return result


def _auction_run(cfg: ExperimentConfig, index: int, clients: ClientFactory | None) -> RunResult:
    seed = derive_seed(cfg.seed, index)
    result = RunResult(index=index, seed=seed)
    started = time.perf_counter()
    agents, llm_clients = [], []
    for binding in cfg.agents:
        profile = cfg.valuations[binding.bidder]
        if binding.kind == "straightforward":
            agents.append(StraightforwardAgent(binding.bidder, profile, cfg.prefer_larger))
        else:
            client = clients.make(index, binding.name)
            llm_clients.append(client)
            agents.append(LlmAuctionAgent(binding.bidder, binding.objective, client, profile))
    try:
        result.outcome = run_auction(agents, cfg.items, cfg.max_rounds, np.random.default_rng(seed))
        result.records = [
            {"kind": "tarj", "agent": _agent_name(cfg, r["bidder"]), "round": r["round"], **r["record"]}
            for r in result.outcome.records
        ]
    except Exception as exc:
        log.error("run %d failed: %s", index, exc)
        result.failures["auction"] = f"{type(exc).__name__}: {exc}"
    finally:
        for client in llm_clients:
            result.exchanges.extend({"kind": "exchange", **e.to_json(include_timing=False)}
                                    for e in client.transcript)
        result.incidents = sum(len(getattr(a, "incidents", ())) for a in agents)
    result.elapsed_s = time.perf_counter() - started
    return result


def _agent_name(cfg: ExperimentConfig, bidder: str) -> str:
    return next(b.name for b in cfg.agents if b.bidder == bidder)


def _execute(cfg: ExperimentConfig, fn: Callable[[int], RunResult], parallelism: int | None) -> RunSet:
    workers = parallelism or cfg.parallelism
    started = time.perf_counter()
    if workers == 1:
        runs = [fn(i) for i in range(cfg.runs)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(fn, range(cfg.runs)))
    return RunSet(config=cfg, runs=runs, elapsed_s=time.perf_counter() - started)


def run_battery_experiment(cfg: ExperimentConfig, parallelism: int | None = None):
    """Returns ``(RunSet, AggregateSeries)``."""
    if cfg.experiment != "battery":
        raise ConfigError("not a battery experiment config")
    clients = ClientFactory(cfg.backend) if cfg.needs_llm else None
    dp_table = None
    if any(b.kind == "dp" for b in cfg.agents):
        _, dp_table = solve_dp(cfg.battery, cfg.prices)
    runset = _execute(cfg, lambda i: _battery_run(cfg, i, clients, dp_table), parallelism)
    return runset, aggregate_battery(runset)


def run_auction_experiment(cfg: ExperimentConfig, parallelism: int | None = None):
    """Returns ``(RunSet, AggregateSeries)``."""
    if cfg.experiment != "auction":
        raise ConfigError("not an auction experiment config")
    clients = ClientFactory(cfg.backend) if cfg.needs_llm else None
    runset = _execute(cfg, lambda i: _auction_run(cfg, i, clients), parallelism)
    return runset, aggregate_auction(runset)


def run_experiment(cfg: ExperimentConfig, parallelism: int | None = None):
    if cfg.experiment == "battery":
        return run_battery_experiment(cfg, parallelism)
    return run_auction_experiment(cfg, parallelism)


# ---------------------------------------------------------------- aggregation


@dataclass
class AggregateSeries:
    """Per-day (battery) or per-round (auction) summary statistics.

    Means are exact fractions; ``n`` on each row counts the runs that
    contributed. ``metadata['complete']`` is false when any cell has fewer
    than ``runs`` contributions.
    """

    kind: str
    rows: list[dict]
    metadata: dict

    @property
    def columns(self) -> tuple[str, ...]:
        return BATTERY_COLUMNS if self.kind == "battery" else AUCTION_COLUMNS


def _mean_sd(values: Sequence) -> tuple[Fraction, float]:
    n = len(values)
    mean = Fraction(sum(values)) / n
    if n < 2:
        return mean, 0.0
    ss = sum((Fraction(v) - mean) ** 2 for v in values)
    return mean, math.sqrt(ss / (n - 1))


def git_revision() -> str | None:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None if out.returncode == 0 else None


def _metadata(runset: RunSet) -> dict:
    cfg = runset.config
    return {
        "experiment": cfg.experiment,
        "runs": cfg.runs,
        "seed": cfg.seed,
        "seeds": [r.seed for r in runset.runs],
        "config_hash": cfg.config_hash(),
        "git_revision": git_revision(),
        "flagged_runs": [r.index for r in runset.runs if r.flagged],
        "incidents": sum(r.incidents for r in runset.runs),
        "failures": {str(r.index): r.failures for r in runset.runs if r.failures},
    }


def aggregate_battery(runset: RunSet) -> AggregateSeries:
    cfg = runset.config
    rows = []
    complete = True
    for binding in cfg.agents:
        trajs = [r.trajectories[binding.name] for r in runset.runs if binding.name in r.trajectories]
        if len(trajs) < cfg.runs:
            complete = False
        if not trajs:
            continue
        cumulative = [t.cumulative_rewards() for t in trajs]
        for d in range(cfg.battery.horizon_days):
            mean_soc, sd_soc = _mean_sd([t.days[d].soc_after for t in trajs])
            mean_reward = Fraction(sum(c[d] for c in cumulative), len(trajs)) / 100
            rows.append({
                "day": d + 1,
                "persona": binding.name,
                "condition": binding.condition,
                "mean_soc": mean_soc,
                "sd_soc": sd_soc,
                "mean_reward": mean_reward,
                "n": len(trajs),
            })
    meta = _metadata(runset)
    meta["complete"] = complete
    return AggregateSeries("battery", rows, meta)


def aggregate_auction(runset: RunSet) -> AggregateSeries:
    cfg = runset.config
    outcomes = [r.outcome for r in runset.runs if r.outcome is not None]
    rows = []
    longest = max((o.rounds_used for o in outcomes), default=0)
    for t in range(longest):
        for item in cfg.items:
            # runs that already ended are absent for later rounds
            values = [o.rounds[t].item(item.name).price for o in outcomes if o.rounds_used > t]
            mean, sd = _mean_sd([Fraction(v) for v in values])
            rows.append({
                "round": t + 1,
                "item": item.name,
                "agent_type": cfg.label,
                "mean_bid": mean,
                "sd_bid": sd,
                "n": len(values),
            })
    allocation: dict[str, dict[str, int]] = {it.name: {} for it in cfg.items}
    final_prices: dict[str, list] = {it.name: [] for it in cfg.items}
    for o in outcomes:
        for name, winner in o.allocation.items():
            key = "none" if winner is None else winner
            allocation[name][key] = allocation[name].get(key, 0) + 1
            final_prices[name].append(Fraction(o.prices[name]))
    meta = _metadata(runset)
    meta.update(
        complete=len(outcomes) == cfg.runs,
        agent_type=cfg.label,
        allocation_counts={k: dict(sorted(v.items())) for k, v in allocation.items()},
        mean_final_price={k: float(_mean_sd(v)[0]) if v else None for k, v in final_prices.items()},
        rounds_used=[o.rounds_used for o in outcomes],
        natural_terminations=sum(o.terminated_naturally for o in outcomes),
    )
    return AggregateSeries("auction", rows, meta)


# ---------------------------------------------------------------- export


def _cell(value):
    if isinstance(value, Fraction):
        return float(value)
    return value


def _csv_text(series: AggregateSeries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(series.columns)
    for row in series.rows:
        writer.writerow([_cell(row[c]) for c in series.columns])
    return buf.getvalue()


def _json_text(series: AggregateSeries) -> str:
    payload = {
        "kind": series.kind,
        "columns": list(series.columns) + ["n"],
        "rows": [{k: _cell(v) for k, v in row.items()} for row in series.rows],
        "metadata": series.metadata,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def export(series: AggregateSeries, fmt: str, path) -> Path:
    """Write the series as ``csv`` or ``json``; a directory path gets
    ``aggregate.<fmt>`` inside it."""
    if not series.rows or not series.metadata.get("seeds"):
        raise EmptySeries("nothing to export")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown export format {fmt!r}")
    path = Path(path)
    if path.is_dir() or not path.suffix:
        path = path / f"aggregate.{fmt}"
    text = _csv_text(series) if fmt == "csv" else _json_text(series)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return path


def series_from_json(data: Mapping) -> AggregateSeries:
    rows = [dict(r) for r in data["rows"]]
    return AggregateSeries(data["kind"], rows, dict(data["metadata"]))


def _jsonl(rows) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)


def write_outputs(runset: RunSet, series: AggregateSeries, out_dir, base_dir=".") -> Path:
    """Lay out ``runs/<i>/...``, the aggregates and ``manifest.json``."""
    out = Path(out_dir)
    cfg = runset.config
    try:
        for run in runset.runs:
            run_dir = out / "runs" / str(run.index)
            run_dir.mkdir(parents=True, exist_ok=True)
            if cfg.experiment == "battery":
                lines = [
                    {"agent": b.name, "condition": b.condition, **rec.to_json()}
                    for b in cfg.agents if b.name in run.trajectories
                    for rec in run.trajectories[b.name].days
                ]
            else:
                lines = [r.to_json() for r in run.outcome.rounds] if run.outcome else []
                if run.outcome is not None:
                    (run_dir / "outcome.json").write_text(
                        json.dumps(run.outcome.summary_json(), indent=2, sort_keys=True) + "\n")
            (run_dir / "trajectory.jsonl").write_text(_jsonl(lines))
            (run_dir / "transcript.jsonl").write_text(_jsonl(run.exchanges + run.records))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if series.rows:
        export(series, "csv", out / "aggregate.csv")
        export(series, "json", out / "aggregate.json")
    manifest = {
        "config": dict(cfg.raw),
        "base_dir": str(Path(base_dir).resolve()),
        "config_hash": cfg.config_hash(),
        "experiment": cfg.experiment,
        "backend": cfg.backend.kind,
        "seeds": [r.seed for r in runset.runs],
        "git_revision": git_revision(),
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "timings": {
            "total_s": runset.elapsed_s,
            "per_run_s": [r.elapsed_s for r in runset.runs],
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out
