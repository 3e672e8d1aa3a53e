"""Scenario orchestration, trajectory logs and run metrics."""
from __future__ import annotations

import csv
import json
import logging
import statistics
import time
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

from .actions import IDLE, AgentAction, Decision, is_color_valid
from .blue import make_policy
from .comm import ZERO_VECTOR, broadcast, report_from_observation
from .config import N_BLUE, ScenarioConfig, parse_config
from .engine import RED_AGENT, Engine, make_rng
from .llm.agent import LlmPolicy
from .llm.client import backend_from_config
from .llm.mock import MockLLM
from .llm.prompts import describe_network
from .network import blue_name
from .red import RedAgent

log = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectory.jsonl"
METRICS_FILE = "metrics.csv"
SUMMARY_FILE = "summary.json"


@dataclass
class DecisionRecord:
    episode: int
    step: int
    agent: str
    verb: str
    target: str
    status: str
    reason: str
    valid: bool
    reward_total: float
    comm_vectors: list

    def to_json(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"))


@dataclass
class EpisodeResult:
    episode: int
    cumulative_reward: float = 0.0
    green_failures: int = 0
    impacts: int = 0
    downtime_steps: int = 0
    block_denials: int = 0
    phishing_grants: int = 0
    invalid_actions: int = 0
    action_counts: dict = field(default_factory=dict)
    red_counts: dict = field(default_factory=dict)
    latencies: dict = field(default_factory=dict)
    records: list = field(default_factory=list)


@dataclass
class MetricsSummary:
    name: str
    seed: int
    red_variant: str
    episodes: int
    steps: int
    policies: dict
    episode_rewards: list
    reward_mean: float
    reward_std: float
    action_counts: list
    invalid_actions: int
    latency_by_kind: dict
    mean_decision_latency: float
    green_failures: list = field(default_factory=list)
    impacts: list = field(default_factory=list)
    red_counts: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsSummary":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})


def sample_std(values: Sequence[float]) -> float:
    return statistics.stdev(values) if len(values) > 1 else 0.0


class _PolicyFactory:
    def __init__(self, config: ScenarioConfig, live_llm: bool, network: str, engine: Engine,
                 backend_factory: Optional[Callable] = None):
        self.config = config
        self.live_llm = live_llm
        self.network = network
        self.engine = engine
        self.backend_factory = backend_factory

    def __call__(self, binding, index: int):
        if self.backend_factory is not None:
            backend = self.backend_factory(binding, index)
        elif self.live_llm:
            backend = backend_from_config(self.config.llm)
        else:
            if self.config.llm.endpoint != "mock":
                log.warning("live model not enabled; blue_agent_%d uses the built-in mock", index)
            backend = MockLLM(binding.mock.script, binding.mock.faults, binding.mock.delay)
        st = self.engine.state
        return LlmPolicy(self.config.llm, backend, self.network, st.hosts, st.zones, binding.strategy)


def _decide(policy, obs) -> tuple[Decision, float]:
    started = time.perf_counter()
    decision = policy.decide(obs)
    elapsed = time.perf_counter() - started
    if decision.action.actor != obs.agent or not is_color_valid(decision.action) \
            or decision.action.color != "blue":
        log.warning("%s returned an unusable action %s; sleeping", obs.agent, decision.action)
        decision = Decision(AgentAction(obs.agent, IDLE), "invalid action: not a blue action", False, decision.raw)
    return decision, elapsed


def run_episode(config: ScenarioConfig, episode: int, *, live_llm: bool = False,
                backend_factory: Optional[Callable] = None) -> EpisodeResult:
    engine = Engine(config, episode=episode)
    network = describe_network(engine.state)
    factory = _PolicyFactory(config, live_llm, network, engine, backend_factory)
    policies = {blue_name(i): make_policy(b, llm_factory=factory, index=i) for i, b in enumerate(config.blue)}
    red = RedAgent(config.red_variant, config.red.stealth_interval, config.red.withdraw_threshold)
    red_rng = make_rng(engine.seed, episode, 1)

    result = EpisodeResult(episode)
    counts = {a: Counter() for a in policies}
    red_counts: Counter = Counter()
    latencies = defaultdict(list)
    obs = engine.observe()
    for o in obs.values():
        o.comm_vectors = [ZERO_VECTOR] * (N_BLUE - 1)
    view = engine.red_view()
    pool = ThreadPoolExecutor(N_BLUE) if config.parallel_decisions else None
    try:
        for t in range(config.steps):
            agents = list(policies)
            if pool is not None:
                outs = list(pool.map(lambda a: _decide(policies[a], obs[a]), agents))
            else:
                outs = [_decide(policies[a], obs[a]) for a in agents]
            decisions = dict(zip(agents, (d for d, _ in outs)))
            for a, (_, dt) in zip(agents, outs):
                latencies[policies[a].kind].append(dt)

            red_action = red.next_action(view, red_rng)
            actions = {a: d.action for a, d in decisions.items()}
            actions[RED_AGENT] = red_action
            step = engine.step(actions)
            total = step.reward.total
            result.cumulative_reward += total
            rr = step.reward
            result.green_failures += rr.green_failures
            result.impacts += rr.impact_penalties
            result.downtime_steps += rr.restore_downtime_penalties
            result.block_denials += rr.block_denials
            result.phishing_grants += len(step.green.phishing_grants)

            for a, d in decisions.items():
                counts[a][d.action.verb] += 1
                result.invalid_actions += int(not d.valid)
                result.records.append(DecisionRecord(
                    episode, t, a, d.action.verb, d.action.target_text(), step.statuses[a].value,
                    d.reason, d.valid, total, [str(v) for v in obs[a].comm_vectors],
                ))
            red_counts[red_action.verb] += 1
            result.records.append(DecisionRecord(
                episode, t, RED_AGENT, red_action.verb, red_action.target_text(),
                step.statuses[RED_AGENT].value, "", True, total, [],
            ))

            reports = {i: report_from_observation(step.observations[blue_name(i)]) for i in range(N_BLUE)}
            delivered = broadcast(reports)
            for i in range(N_BLUE):
                step.observations[blue_name(i)].comm_vectors = delivered[i]
            obs = step.observations
            view = step.red_view
    finally:
        if pool is not None:
            pool.shutdown()

    result.action_counts = {a: dict(sorted(c.items())) for a, c in counts.items()}
    result.red_counts = dict(sorted(red_counts.items()))
    result.latencies = dict(latencies)
    return result


def summarize(config: ScenarioConfig, episodes: Sequence[EpisodeResult]) -> MetricsSummary:
    rewards = [e.cumulative_reward for e in episodes]
    by_kind = defaultdict(list)
    for e in episodes:
        for kind, values in e.latencies.items():
            by_kind[kind].extend(values)
    every = [v for values in by_kind.values() for v in values]
    return MetricsSummary(
        name=config.name,
        seed=config.seed,
        red_variant=config.red_variant,
        episodes=len(episodes),
        steps=config.steps,
        policies={blue_name(i): b.kind for i, b in enumerate(config.blue)},
        episode_rewards=rewards,
        reward_mean=statistics.fmean(rewards),
        reward_std=sample_std(rewards),
        action_counts=[e.action_counts for e in episodes],
        invalid_actions=sum(e.invalid_actions for e in episodes),
        latency_by_kind={k: statistics.fmean(v) for k, v in sorted(by_kind.items())},
        mean_decision_latency=statistics.fmean(every) if every else 0.0,
        green_failures=[e.green_failures for e in episodes],
        impacts=[e.impacts for e in episodes],
        red_counts=[e.red_counts for e in episodes],
    )


def write_outputs(out_dir: Path, episodes: Sequence[EpisodeResult], summary: MetricsSummary) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / TRAJECTORY_FILE, "w", encoding="utf-8") as fh:
        for e in episodes:
            for rec in e.records:
                fh.write(rec.to_json() + "\n")
    with open(out_dir / METRICS_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "cumulative_reward", "green_failures", "impacts", "downtime_steps",
                    "block_denials", "phishing_grants", "invalid_actions"])
        for e in episodes:
            w.writerow([e.episode, e.cumulative_reward, e.green_failures, e.impacts, e.downtime_steps,
                        e.block_denials, e.phishing_grants, e.invalid_actions])
    with open(out_dir / SUMMARY_FILE, "w", encoding="utf-8") as fh:
        json.dump(summary.to_dict(), fh, indent=2)


def run_scenario(config: Union[ScenarioConfig, dict], out_dir: Union[str, Path, None] = None, *,
                 live_llm: bool = False, backend_factory: Optional[Callable] = None,
                 return_episodes: bool = False):
    """Run every episode of ``config``; writes artefacts when ``out_dir`` is given."""
    config = parse_config(config)
    run = lambda ep: run_episode(config, ep, live_llm=live_llm, backend_factory=backend_factory)  # noqa: E731
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            episodes = list(pool.map(run, range(config.episodes)))
    else:
        episodes = [run(ep) for ep in range(config.episodes)]
    summary = summarize(config, episodes)
    if summary.invalid_actions and any(b.kind == "llm" for b in config.blue):
        log.warning("%s: %d invalid LLM actions fell back to Sleep", config.name, summary.invalid_actions)
    if out_dir is not None:
        write_outputs(Path(out_dir), episodes, summary)
    return (summary, episodes) if return_episodes else summary


def read_trajectory(path: Union[str, Path]) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def recount_actions(records: Sequence[dict]) -> list[dict]:
    """Per-episode blue action counts rebuilt from a trajectory log."""
    per_ep: dict = defaultdict(lambda: defaultdict(Counter))
    for r in records:
        if r["agent"].startswith("blue"):
            per_ep[r["episode"]][r["agent"]][r["verb"]] += 1
    return [
        {a: dict(sorted(c.items())) for a, c in sorted(per_ep[ep].items())}
        for ep in sorted(per_ep)
    ]


COMPARE_COLUMNS = ["run", "episodes", "steps", "reward_mean", "reward_std", "mean_latency",
                   "latency_ratio", "invalid_actions"]


def compare_runs(summaries: Sequence[Union[MetricsSummary, dict]], out_dir: Union[str, Path, None] = None) -> list[dict]:
    """Side-by-side table; ``latency_ratio`` is relative to the first run."""
    if len(summaries) < 2:
        raise ValueError("compare needs at least two run summaries")
    runs = [s if isinstance(s, MetricsSummary) else MetricsSummary.from_dict(s) for s in summaries]
    if len({r.steps for r in runs}) > 1 or len({r.episodes for r in runs}) > 1:
        log.warning("comparing runs with different episode or step counts")
    base = runs[0].mean_decision_latency
    rows = []
    for r in runs:
        rows.append({
            "run": r.name,
            "episodes": r.episodes,
            "steps": r.steps,
            "reward_mean": r.reward_mean,
            "reward_std": r.reward_std,
            "mean_latency": r.mean_decision_latency,
            "latency_ratio": r.mean_decision_latency / base if base > 0 else float("nan"),
            "invalid_actions": r.invalid_actions,
        })
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=COMPARE_COLUMNS)
            w.writeheader()
            w.writerows(rows)
        _bar_chart(rows, "reward_mean", out / "reward_mean.svg", err="reward_std")
        _bar_chart(rows, "mean_latency", out / "mean_latency.svg")
    return rows


def _bar_chart(rows: list[dict], metric: str, path: Path, err: Optional[str] = None) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(rows)), 3.5))
    names = [r["run"] for r in rows]
    values = [r[metric] for r in rows]
    ax.bar(names, values, yerr=[r[err] for r in rows] if err else None, capsize=4, color="#4c72b0")
    ax.set_ylabel(metric)
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
