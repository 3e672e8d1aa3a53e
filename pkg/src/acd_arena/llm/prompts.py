"""System/user message assembly for the three prompting strategies."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from importlib import resources
from string import Template

from ..network import NetworkState, blue_name
from .observation import FormattedObservation

log = logging.getLogger(__name__)

TEMPLATE_VERSION = "v1"


class PromptStrategy(str, Enum):
    INSTRUCT = "instruct"
    FEWSHOT_INSTRUCT = "fewshot_instruct"
    ROLE_FEWSHOT = "role_fewshot"


_SECTIONS = {
    PromptStrategy.INSTRUCT: ("task",),
    PromptStrategy.FEWSHOT_INSTRUCT: ("task", "examples"),
    PromptStrategy.ROLE_FEWSHOT: ("persona", "task", "examples"),
}


@lru_cache(maxsize=None)
def load_template(name: str, version: str = TEMPLATE_VERSION) -> Template:
    text = resources.files(__package__).joinpath("templates", version, f"{name}.txt").read_text("utf-8")
    return Template(text.rstrip("\n"))


def estimate_tokens(text: str) -> int:
    # ~4 characters per token for English text
    return (len(text) + 3) // 4


def describe_network(state: NetworkState) -> str:
    lines = []
    agents = sorted({z.guardian for z in state.zones.values() if z.guardian is not None})
    for i in agents:
        parts = [f"{z}: {', '.join(h.id for h in state.hosts_in(z))}" for z in state.zones_of(i)]
        lines.append(f"- {blue_name(i)} defends {'; '.join(parts)}")
    for z in sorted(z.id for z in state.zones.values() if z.guardian is None):
        lines.append(f"- {z} (not defended): {', '.join(h.id for h in state.hosts_in(z))}")
    return "\n".join(lines)


def system_message(strategy: PromptStrategy, network: str, version: str = TEMPLATE_VERSION) -> str:
    strategy = PromptStrategy(strategy)
    parts = [load_template(s, version).substitute(network=network) for s in _SECTIONS[strategy]]
    return "\n\n".join(parts)


@dataclass
class PromptMessages:
    system: str
    user: str
    truncated: int = 0

    def as_chat(self) -> list[dict]:
        return [{"role": "system", "content": self.system}, {"role": "user", "content": self.user}]


def build_messages(strategy: PromptStrategy, formatted: FormattedObservation, network: str = "",
                   token_budget: int = 2048, version: str = TEMPLATE_VERSION) -> PromptMessages:
    system = system_message(strategy, network, version)
    user_t = load_template("user", version)
    user = user_t.substitute(observation=formatted.render())
    dropped = 0
    while estimate_tokens(user) > token_budget and dropped < len(formatted.suspicious_activity):
        dropped += 1
        trimmed = replace(formatted, suspicious_activity=formatted.suspicious_activity[dropped:])
        user = user_t.substitute(observation=trimmed.render())
    if dropped:
        log.info("truncated %d oldest alerts for %s to fit %d tokens", dropped, formatted.agent_name, token_budget)
    return PromptMessages(system, user, dropped)
