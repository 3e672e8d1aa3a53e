"""Action vocabulary shared by every agent colour."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

BLUE_VERBS = (
    "Monitor",
    "Analyse",
    "DeployDecoy",
    "Remove",
    "Restore",
    "BlockTrafficZone",
    "AllowTrafficZone",
    "Sleep",
)
RED_VERBS = ("Discover", "Exploit", "PrivilegeEscalate", "DegradeService", "Impact", "Withdraw")
GREEN_VERBS = ("LocalWork", "AccessService")

# Sleep doubles as the idle action for red and green
IDLE = "Sleep"
ZONE_PAIR_VERBS = ("BlockTrafficZone", "AllowTrafficZone")
HOST_VERBS = ("Analyse", "DeployDecoy", "Remove", "Restore")

Target = Union[str, tuple, None]


class ActionStatus(str, Enum):
    TRUE = "TRUE"
    FALSE = "FALSE"
    UNKNOWN = "UNKNOWN"
    IN_PROGRESS = "IN_PROGRESS"


def color_of(agent: str) -> str:
    for color in ("blue", "red", "green"):
        if agent.startswith(color):
            return color
    raise ValueError(f"cannot infer colour of agent '{agent}'")


def verbs_for(color: str) -> tuple:
    return {"blue": BLUE_VERBS, "red": RED_VERBS + (IDLE,), "green": GREEN_VERBS + (IDLE,)}[color]


@dataclass(frozen=True)
class AgentAction:
    actor: str
    verb: str
    target: Target = None
    # DeployDecoy: decoy name; Discover: "loud" or "quiet"; Exploit: service
    option: Optional[str] = None

    @property
    def color(self) -> str:
        return color_of(self.actor)

    def target_text(self) -> str:
        if self.target is None:
            return ""
        if isinstance(self.target, tuple):
            return "->".join(self.target)
        return self.target

    def describe(self) -> str:
        text = self.target_text()
        return f"{self.verb} {text}" if text else self.verb

    def to_dict(self) -> dict:
        target = list(self.target) if isinstance(self.target, tuple) else self.target
        return {"actor": self.actor, "verb": self.verb, "target": target, "option": self.option}

    @classmethod
    def from_dict(cls, data: dict) -> "AgentAction":
        target = data.get("target")
        if isinstance(target, list):
            target = tuple(target)
        return cls(data["actor"], data["verb"], target, data.get("option"))


def is_color_valid(action: AgentAction) -> bool:
    try:
        allowed = verbs_for(action.color)
    except ValueError:
        return False
    if action.verb not in allowed:
        return False
    is_pair = isinstance(action.target, tuple)
    if action.verb in ZONE_PAIR_VERBS:
        return is_pair and len(action.target) == 2
    return not is_pair


def sleep(actor: str) -> AgentAction:
    return AgentAction(actor, IDLE)


@dataclass
class Decision:
    """A policy's choice for one step, with its justification."""

    action: AgentAction
    reason: str = ""
    valid: bool = True
    raw: str = ""
