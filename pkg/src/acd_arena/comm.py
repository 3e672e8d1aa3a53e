"""8-bit defender broadcast.

Wire layout (index 0 is the first array element)::

    bits 0..4  detection flags; bit j set when activity was traced to agent j's zones
    bits 5..6  compromise level of the sender's own zones, read as (bit5, bit6):
               00 none, 01 scan / remote exploit, 10 user, 11 admin
    bit 7      sender is busy with a multi-step action
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

N_AGENTS = 5
VECTOR_BITS = 8

LEVELS = ("none", "scan", "user", "admin")
LEVEL_CODES = {"none": (0, 0), "scan": (0, 1), "user": (1, 0), "admin": (1, 1)}
_CODE_LEVELS = {v: k for k, v in LEVEL_CODES.items()}


class ProtocolError(ValueError):
    """Bad communication vector, report, or broadcast input."""


@dataclass(frozen=True)
class CommReport:
    detections: frozenset = frozenset()
    level: str = "none"
    busy: bool = False

    def __post_init__(self):
        object.__setattr__(self, "detections", frozenset(self.detections))
        if self.level not in LEVEL_CODES:
            raise ProtocolError(f"unknown compromise level '{self.level}'")
        bad = [d for d in self.detections if not 0 <= d < N_AGENTS]
        if bad:
            raise ProtocolError(f"detection index {bad[0]} outside 0..{N_AGENTS - 1}")


@dataclass(frozen=True)
class CommVector:
    bits: tuple

    def __post_init__(self):
        bits = tuple(self.bits)
        if len(bits) != VECTOR_BITS:
            raise ProtocolError(f"vector must have {VECTOR_BITS} bits, got {len(bits)}")
        for b in bits:
            if isinstance(b, bool) or b not in (0, 1):
                raise ProtocolError(f"non-binary entry {b!r}")
        object.__setattr__(self, "bits", tuple(int(b) for b in bits))

    def __str__(self) -> str:
        return "[" + ",".join(str(b) for b in self.bits) + "]"

    @classmethod
    def parse(cls, text: str) -> "CommVector":
        body = text.strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise ProtocolError(f"not a binary array: {text!r}")
        try:
            bits = [int(p) for p in body[1:-1].split(",")]
        except ValueError as err:
            raise ProtocolError(f"not a binary array: {text!r}") from err
        return cls(tuple(bits))

    @property
    def level(self) -> str:
        return _CODE_LEVELS[(self.bits[5], self.bits[6])]


ZERO_VECTOR = CommVector((0,) * VECTOR_BITS)


def encode(report: CommReport, self_index: int) -> CommVector:
    if self_index in report.detections:
        raise ProtocolError(f"agent {self_index} cannot flag its own network")
    bits = [1 if j in report.detections else 0 for j in range(N_AGENTS)]
    bits.extend(LEVEL_CODES[report.level])
    bits.append(1 if report.busy else 0)
    return CommVector(tuple(bits))


def decode(vector) -> CommReport:
    if not isinstance(vector, CommVector):
        vector = CommVector(tuple(vector))
    bits = vector.bits
    return CommReport(
        detections=frozenset(j for j in range(N_AGENTS) if bits[j]),
        level=_CODE_LEVELS[(bits[5], bits[6])],
        busy=bool(bits[7]),
    )


def broadcast(reports: Mapping[int, CommReport]) -> dict[int, list[CommVector]]:
    for i in range(N_AGENTS):
        if i not in reports:
            raise ProtocolError(f"missing report from blue_agent_{i}")
    vectors = {i: encode(reports[i], i) for i in range(N_AGENTS)}
    return {i: [vectors[j] for j in range(N_AGENTS) if j != i] for i in range(N_AGENTS)}


_SEVERITY_LEVEL = {"INFO": "scan", "USER": "user", "ADMIN": "admin"}


def report_from_observation(obs) -> CommReport:
    """Summarise one blue observation into the report it broadcasts."""
    zone_owner = {z: j for j, zones in obs.peer_zones.items() for z in zones}
    detections = set()
    level = "none"
    for alert in obs.alerts:
        owner = zone_owner.get(alert.source_zone)
        if owner is not None and owner != obs.index:
            detections.add(owner)
        level = max(level, _SEVERITY_LEVEL[alert.severity.name], key=LEVELS.index)
    for belief in obs.beliefs.values():
        level = max(level, LEVELS[int(belief) + 1], key=LEVELS.index)
    return CommReport(frozenset(detections), level, bool(obs.busy))


def vector_strings(vectors: Sequence[CommVector]) -> list[str]:
    return [str(v) for v in vectors]
