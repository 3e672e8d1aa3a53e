"""Blue policy that asks a chat model for each action."""
from __future__ import annotations

import logging
import threading
from typing import Optional

from ..actions import IDLE, AgentAction, Decision
from ..comm import CommReport, report_from_observation
from ..config import LlmConfig
from ..engine import Observation
from .client import ChatBackend, LlmError, query
from .observation import format_observation
from .parse import parse_decision
from .prompts import PromptStrategy, build_messages

log = logging.getLogger(__name__)

LlmDecision = Decision


class LlmPolicy:
    kind = "llm"

    def __init__(self, config: LlmConfig, backend: ChatBackend, network: str,
                 hosts, zones, strategy: PromptStrategy = PromptStrategy.ROLE_FEWSHOT):
        self.config = config
        self.backend = backend
        self.network = network
        self.hosts = set(hosts)
        self.zones = set(zones)
        self.strategy = PromptStrategy(strategy)
        self.invalid = 0
        self.truncations = 0
        self.latencies: list[float] = []
        self._lock = threading.Lock()

    def decide(self, observation: Observation) -> Decision:
        formatted = format_observation(observation)
        msgs = build_messages(self.strategy, formatted, self.network, self.config.token_budget)
        if msgs.truncated:
            self.truncations += 1
        try:
            result = query(self.config, msgs.as_chat(), self.backend, step=observation.step,
                           agent=observation.agent)
        except LlmError as err:
            log.warning("%s: %s", observation.agent, err)
            with self._lock:
                self.invalid += 1
            return Decision(AgentAction(observation.agent, IDLE), f"invalid action: {err}", False, "")
        self.latencies.append(result.latency)
        decision = parse_decision(result.text, observation.agent, self.hosts, self.zones)
        if not decision.valid:
            with self._lock:
                self.invalid += 1
        return decision


def comm_report_from_decision(observation: Observation, decision: Optional[Decision] = None) -> CommReport:
    """Report broadcast after ``decision`` was resolved into ``observation``."""
    return report_from_observation(observation)
