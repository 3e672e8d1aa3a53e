"""Desk-scale multi-agent cyber-defence arena with LLM-backed defenders."""
from .actions import ActionStatus, AgentAction, Decision
from .comm import CommReport, CommVector, broadcast, decode, encode
from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .engine import Engine, Observation, StepResult
from .network import Compromise, MissionPhase, build_topology
from .red import RedAgent
from .runner import MetricsSummary, compare_runs, run_episode, run_scenario

__version__ = "0.1.0"

__all__ = [
    "ActionStatus",
    "AgentAction",
    "CommReport",
    "CommVector",
    "Compromise",
    "ConfigError",
    "Decision",
    "Engine",
    "MetricsSummary",
    "MissionPhase",
    "Observation",
    "RedAgent",
    "ScenarioConfig",
    "StepResult",
    "broadcast",
    "build_topology",
    "compare_runs",
    "decode",
    "encode",
    "load_config",
    "parse_config",
    "run_episode",
    "run_scenario",
]
