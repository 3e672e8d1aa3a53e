"""Natural-language rendering of a blue observation, and its inverse."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..comm import ZERO_VECTOR, CommVector
from ..engine import Observation

FIELDS = (
    ("agent_name", "Agent"),
    ("mission_phase", "Mission Phase"),
    ("last_action", "Last Action"),
    ("last_action_status", "Last Action Status"),
    ("communication_vectors", "Communication Vectors"),
    ("suspicious_activity", "Suspicious Activity Detected"),
)
LIST_FIELDS = {"communication_vectors", "suspicious_activity"}
NONE = "None"

_AGENT_RE = re.compile(r"^blue_agent_(\d+)$")
_ITEM_LABEL_RE = re.compile(r"^blue_agent_\d+: (\[.*\])$")


@dataclass
class FormattedObservation:
    agent_name: str
    mission_phase: str
    last_action: str
    last_action_status: str
    communication_vectors: list = field(default_factory=list)
    suspicious_activity: list = field(default_factory=list)

    def peer_labels(self) -> list[Optional[str]]:
        m = _AGENT_RE.match(self.agent_name)
        n = len(self.communication_vectors)
        if m is None or n == 0:
            return [None] * n
        me = int(m.group(1))
        peers = [i for i in range(n + 1) if i != me]
        if len(peers) != n:
            return [None] * n
        return [f"blue_agent_{i}" for i in peers]

    def render(self) -> str:
        lines = []
        for name, label in FIELDS:
            value = getattr(self, name)
            if name not in LIST_FIELDS:
                lines.append(f"{label}: {value}")
            elif not value:
                lines.append(f"{label}: {NONE}")
            else:
                lines.append(f"{label}:")
                tags = self.peer_labels() if name == "communication_vectors" else [None] * len(value)
                for tag, item in zip(tags, value):
                    lines.append(f"- {tag}: {item}" if tag else f"- {item}")
        return "\n".join(lines)


def format_observation(obs: Observation, comm_vectors: Optional[Sequence] = None,
                       phase=None) -> FormattedObservation:
    vectors = obs.comm_vectors if comm_vectors is None else comm_vectors
    if not vectors:
        vectors = [ZERO_VECTOR] * (len(obs.peer_zones) - 1)
    phase = obs.phase if phase is None else phase
    alerts = sorted(obs.alerts, key=lambda a: (a.step, a.host))
    return FormattedObservation(
        agent_name=obs.agent,
        mission_phase=getattr(phase, "value", phase),
        last_action=obs.last_action.describe() if obs.last_action else NONE,
        last_action_status=obs.last_status.value,
        communication_vectors=[str(v if isinstance(v, CommVector) else CommVector(tuple(v))) for v in vectors],
        suspicious_activity=[a.render() for a in alerts],
    )


def parse_observation(text: str) -> FormattedObservation:
    """Recover field values from :meth:`FormattedObservation.render` output."""
    lines = text.splitlines()
    values: dict = {}
    pos = 0
    for name, label in FIELDS:
        if pos >= len(lines) or not lines[pos].startswith(label + ":"):
            raise ValueError(f"expected field '{label}' at line {pos + 1}")
        rest = lines[pos][len(label) + 1:]
        pos += 1
        if name not in LIST_FIELDS:
            values[name] = rest[1:] if rest.startswith(" ") else rest
            continue
        items = []
        if rest.strip() != NONE:
            while pos < len(lines) and lines[pos].startswith("- "):
                item = lines[pos][2:]
                if name == "communication_vectors":
                    m = _ITEM_LABEL_RE.match(item)
                    if m:
                        item = m.group(1)
                items.append(item)
                pos += 1
        values[name] = items
    return FormattedObservation(**values)
