"""Scenario configuration.

All run parameters live in one JSON document that validates into
:class:`ScenarioConfig`. The same models double as request bodies for the
HTTP service.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError

NetworkName = Literal["deployed_A", "deployed_B", "headquarters", "contractor"]
ZoneKind = Literal["restricted", "operational", "public_access", "admin", "office", "contractor"]
RedVariant = Literal["default", "aggressive", "stealthy", "impact", "degrade"]
PolicyKind = Literal["sleep", "reactive", "remote", "llm"]
StrategyName = Literal["instruct", "fewshot_instruct", "role_fewshot"]

N_BLUE = 5


class ConfigError(ValueError):
    """Raised for malformed or inconsistent scenario configuration."""


class ZoneSpec(BaseModel):
    network: NetworkName
    kind: ZoneKind
    hosts: int = 2
    critical: list[int] = Field(default_factory=list)


def _default_zones() -> list[ZoneSpec]:
    return [
        ZoneSpec(network="deployed_A", kind="restricted"),
        ZoneSpec(network="deployed_A", kind="operational", critical=[0]),
        ZoneSpec(network="deployed_B", kind="restricted"),
        ZoneSpec(network="deployed_B", kind="operational", critical=[0]),
        ZoneSpec(network="headquarters", kind="public_access"),
        ZoneSpec(network="headquarters", kind="admin"),
        ZoneSpec(network="headquarters", kind="office"),
        ZoneSpec(network="contractor", kind="contractor"),
    ]


def _default_guardians() -> dict[int, list[str]]:
    return {
        0: ["deployed_a_restricted"],
        1: ["deployed_a_operational"],
        2: ["deployed_b_restricted"],
        3: ["deployed_b_operational"],
        4: ["hq_public_access", "hq_admin", "hq_office"],
    }


class TopologyConfig(BaseModel):
    zones: list[ZoneSpec] = Field(default_factory=_default_zones)
    # blue agent index -> zone ids it guards
    guardians: dict[int, list[str]] = Field(default_factory=_default_guardians)
    phase_boundaries: tuple[int, int] = (167, 334)
    # None means every pair of zones may talk outside active missions
    allowed_pairs: Optional[list[tuple[str, str]]] = None


class RewardWeights(BaseModel):
    green: float = 1.0
    impact: float = 5.0
    impact_critical: float = 10.0
    restore: float = 1.0
    block: float = 1.0
    phase_multipliers: dict[str, float] = Field(
        default_factory=lambda: {"planning": 1.0, "mission_A": 2.0, "mission_B": 2.0}
    )

    def check(self) -> None:
        for name in ("green", "impact", "impact_critical", "restore", "block"):
            if getattr(self, name) < 0:
                raise ConfigError(f"rewards.{name}: weight must be non-negative")
        for phase, mult in self.phase_multipliers.items():
            if mult < 0:
                raise ConfigError(f"rewards.phase_multipliers.{phase}: must be non-negative")


class Probabilities(BaseModel):
    detect_scan: float = 0.5
    detect_scan_quiet: float = 0.1
    detect_exploit: float = 0.75
    detect_decoy: float = 1.0
    fp_green: float = 0.02
    p_phish: float = 0.01
    green_local_work: float = 0.5

    def check(self) -> None:
        for name, value in self.model_dump().items():
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"probabilities.{name}: must lie in [0, 1]")


class Durations(BaseModel):
    analyse: int = 2
    deploy_decoy: int = 2
    restore: int = 5
    restore_downtime: int = 5
    decoy_catalogue: list[str] = Field(
        default_factory=lambda: ["decoy_apache", "decoy_tomcat", "decoy_smtp"]
    )

    def check(self) -> None:
        for name in ("analyse", "deploy_decoy", "restore"):
            if getattr(self, name) < 1:
                raise ConfigError(f"durations.{name}: must be >= 1 step")
        if self.restore_downtime < 0:
            raise ConfigError("durations.restore_downtime: must be >= 0")


class LlmConfig(BaseModel):
    endpoint: str = "mock"
    model: str = "mock-defender"
    temperature: float = 1.0
    timeout: float = 30.0
    max_retries: int = 2
    backoff: float = 0.5
    token_budget: int = 2048
    api_key_env: str = "OPENAI_API_KEY"

    def check(self) -> None:
        if self.temperature < 0:
            raise ConfigError("llm.temperature: must be >= 0")
        if self.max_retries < 0:
            raise ConfigError("llm.max_retries: must be >= 0")


class MockSpec(BaseModel):
    """Scripted in-repo chat endpoint used when no live model is requested."""

    script: dict[int, str] = Field(default_factory=dict)
    faults: dict[int, Literal["malformed", "prose", "wrong_color", "timeout"]] = Field(
        default_factory=dict
    )
    delay: float = 0.0


class PolicyBinding(BaseModel):
    kind: PolicyKind = "sleep"
    # simulated per-decision inference time for scripted policies, seconds
    delay: float = 0.0
    info_threshold: int = 2
    address: Optional[str] = None
    timeout: float = 1.0
    strategy: StrategyName = "role_fewshot"
    mock: MockSpec = Field(default_factory=MockSpec)


class RedConfig(BaseModel):
    stealth_interval: int = 3
    withdraw_threshold: int = 2


class ScenarioConfig(BaseModel):
    name: str = "scenario"
    topology: TopologyConfig = Field(default_factory=TopologyConfig)
    episodes: int = 2
    steps: int = 500
    seed: int = 0
    red_variant: RedVariant = "default"
    red: RedConfig = Field(default_factory=RedConfig)
    blue: list[PolicyBinding] = Field(default_factory=lambda: [PolicyBinding() for _ in range(N_BLUE)])
    llm: LlmConfig = Field(default_factory=LlmConfig)
    rewards: RewardWeights = Field(default_factory=RewardWeights)
    probabilities: Probabilities = Field(default_factory=Probabilities)
    durations: Durations = Field(default_factory=Durations)
    output_dir: str = "runs"
    workers: int = 1
    parallel_decisions: bool = False

    def check(self) -> "ScenarioConfig":
        if self.steps < 1:
            raise ConfigError("steps: must be >= 1")
        if self.episodes < 1:
            raise ConfigError("episodes: must be >= 1")
        if len(self.blue) != N_BLUE:
            raise ConfigError(f"blue: exactly {N_BLUE} policy bindings required, got {len(self.blue)}")
        b1, b2 = self.topology.phase_boundaries
        if not 0 < b1 <= b2:
            raise ConfigError("topology.phase_boundaries: need 0 < first <= second")
        self.rewards.check()
        self.probabilities.check()
        self.durations.check()
        self.llm.check()
        return self


def _location(err: ValidationError) -> str:
    first = err.errors()[0]
    loc = ".".join(str(p) for p in first["loc"])
    return f"{loc}: {first['msg']}"


def parse_config(data: Union[dict, ScenarioConfig]) -> ScenarioConfig:
    if isinstance(data, ScenarioConfig):
        return data.check()
    try:
        cfg = ScenarioConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_location(err)) from err
    return cfg.check()


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(json.load(fh))
