"""Zoned enterprise network: topology, mission phases and connectivity."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from itertools import combinations
from typing import Iterable, Optional

from .config import N_BLUE, ConfigError, ScenarioConfig

NETWORK_PREFIX = {
    "deployed_A": "deployed_a",
    "deployed_B": "deployed_b",
    "headquarters": "hq",
    "contractor": "contractor",
}

REQUIRED_ZONES = (
    ("deployed_A", "restricted"),
    ("deployed_A", "operational"),
    ("deployed_B", "restricted"),
    ("deployed_B", "operational"),
    ("headquarters", "public_access"),
    ("headquarters", "admin"),
    ("headquarters", "office"),
    ("contractor", "contractor"),
)

SERVER_SERVICES = frozenset({"http", "ssh"})
WORKSTATION_SERVICES = frozenset({"ssh"})
GREEN_SERVICE = "http"


class MissionPhase(str, Enum):
    PLANNING = "planning"
    MISSION_A = "mission_A"
    MISSION_B = "mission_B"


class Compromise(IntEnum):
    CLEAN = 0
    USER = 1
    ADMIN = 2

    @property
    def label(self) -> str:
        return self.name.lower()


def zone_id(network: str, kind: str) -> str:
    prefix = NETWORK_PREFIX[network]
    return prefix if kind == "contractor" else f"{prefix}_{kind}"


def blue_name(index: int) -> str:
    return f"blue_agent_{index}"


def blue_index(name: str) -> int:
    return int(name.rsplit("_", 1)[1])


def pair(a: str, b: str) -> frozenset:
    return frozenset((a, b))


@dataclass(frozen=True)
class Zone:
    id: str
    kind: str
    network: str
    guardian: Optional[int] = None


@dataclass
class Host:
    id: str
    zone: str
    services: frozenset
    critical: bool = False
    compromise: Compromise = Compromise.CLEAN
    decoys: set = field(default_factory=set)
    degraded: bool = False
    unavailable_until: Optional[int] = None

    def available(self, step: int) -> bool:
        return self.unavailable_until is None or step > self.unavailable_until

    @property
    def serves_green(self) -> bool:
        return GREEN_SERVICE in self.services


@dataclass
class NetworkState:
    zones: dict[str, Zone]
    hosts: dict[str, Host]
    allowed_pairs: frozenset
    blocked: set = field(default_factory=set)
    # hosts red has walked away from; cleared when the host is cleaned
    abandoned: set = field(default_factory=set)
    red_known: set = field(default_factory=set)
    step: int = 0

    def hosts_in(self, zone: str) -> list[Host]:
        return [h for h in self.hosts.values() if h.zone == zone]

    def zones_of(self, agent_index: int) -> list[str]:
        return [z.id for z in self.zones.values() if z.guardian == agent_index]

    def hosts_of(self, agent_index: int) -> list[str]:
        zones = set(self.zones_of(agent_index))
        return [h.id for h in self.hosts.values() if h.zone in zones]

    def guardian_of(self, host_id: str) -> Optional[int]:
        return self.zones[self.hosts[host_id].zone].guardian

    def red_footholds(self) -> dict[str, Compromise]:
        return {
            h.id: h.compromise
            for h in self.hosts.values()
            if h.compromise > Compromise.CLEAN and h.id not in self.abandoned
        }

    def snapshot(self) -> dict:
        return {
            "step": self.step,
            "hosts": {
                h.id: [int(h.compromise), sorted(h.decoys), h.degraded, h.unavailable_until]
                for h in sorted(self.hosts.values(), key=lambda h: h.id)
            },
            "blocked": sorted(sorted(p) for p in self.blocked),
            "abandoned": sorted(self.abandoned),
            "red_known": sorted(self.red_known),
        }

    def state_hash(self) -> str:
        blob = json.dumps(self.snapshot(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class ConnectivityPolicy:
    phase_allowed: frozenset
    blocked_overrides: frozenset

    @property
    def allowed(self) -> frozenset:
        return self.phase_allowed - self.blocked_overrides

    def permits(self, a: str, b: str) -> bool:
        return a == b or pair(a, b) in self.allowed

    def phase_permits(self, a: str, b: str) -> bool:
        return a == b or pair(a, b) in self.phase_allowed


def _check_zones(topo) -> None:
    seen = [(z.network, z.kind) for z in topo.zones]
    for i, key in enumerate(seen):
        if key not in REQUIRED_ZONES:
            raise ConfigError(f"topology.zones[{i}]: unexpected zone {key[0]}/{key[1]}")
        if seen.count(key) > 1:
            raise ConfigError(f"topology.zones[{i}]: duplicate zone {zone_id(*key)}")
    for key in REQUIRED_ZONES:
        if key not in seen:
            raise ConfigError(f"topology.zones: missing zone {zone_id(*key)}")
    for i, z in enumerate(topo.zones):
        if z.hosts < 1:
            raise ConfigError(f"topology.zones[{i}].hosts: need at least one host")
        bad = [c for c in z.critical if not 0 <= c < z.hosts]
        if bad:
            raise ConfigError(f"topology.zones[{i}].critical: host index {bad[0]} out of range")


def _guardian_map(topo, zone_ids: Iterable[str]) -> dict[str, int]:
    zone_ids = set(zone_ids)
    owner: dict[str, int] = {}
    for agent, zones in topo.guardians.items():
        if not 0 <= agent < N_BLUE:
            raise ConfigError(f"topology.guardians: agent index {agent} outside 0..{N_BLUE - 1}")
        for z in zones:
            if z not in zone_ids:
                raise ConfigError(f"topology.guardians: unknown zone '{z}'")
            if z in owner:
                raise ConfigError(f"topology.guardians: zone '{z}' has more than one guardian")
            owner[z] = agent
    if "contractor" in owner:
        raise ConfigError("topology.guardians: the contractor zone cannot have a guardian")
    for z in sorted(zone_ids - {"contractor"}):
        if z not in owner:
            raise ConfigError(f"topology.guardians: zone '{z}' has no guardian")
    missing = set(range(N_BLUE)) - set(owner.values())
    if missing:
        raise ConfigError(f"topology.guardians: agent {min(missing)} guards no zone")
    return owner


def build_topology(config: ScenarioConfig) -> NetworkState:
    topo = config.topology
    _check_zones(topo)
    ids = [zone_id(z.network, z.kind) for z in topo.zones]
    owner = _guardian_map(topo, ids)

    zones: dict[str, Zone] = {}
    hosts: dict[str, Host] = {}
    for spec, zid in zip(topo.zones, ids):
        zones[zid] = Zone(id=zid, kind=spec.kind, network=spec.network, guardian=owner.get(zid))
        for n in range(spec.hosts):
            hid = f"{zid}_host_{n}"
            hosts[hid] = Host(
                id=hid,
                zone=zid,
                services=SERVER_SERVICES if n == 0 else WORKSTATION_SERVICES,
                critical=n in spec.critical,
            )

    if topo.allowed_pairs is None:
        allowed = frozenset(pair(a, b) for a, b in combinations(sorted(zones), 2))
    else:
        for a, b in topo.allowed_pairs:
            for z in (a, b):
                if z not in zones:
                    raise ConfigError(f"topology.allowed_pairs: unknown zone '{z}'")
        allowed = frozenset(pair(a, b) for a, b in topo.allowed_pairs if a != b)

    foothold = hosts["contractor_host_0"]
    foothold.compromise = Compromise.USER
    return NetworkState(zones=zones, hosts=hosts, allowed_pairs=allowed, red_known={foothold.id})


def phase_at(step: int, config: ScenarioConfig) -> MissionPhase:
    if not 0 <= step < config.steps:
        raise ValueError(f"step {step} outside episode of {config.steps} steps")
    first, second = config.topology.phase_boundaries
    if step < first:
        return MissionPhase.PLANNING
    if step < second:
        return MissionPhase.MISSION_A
    return MissionPhase.MISSION_B


def _isolated_pairs(state: NetworkState, network: str) -> set:
    """Pairs cut while ``network`` runs its mission."""
    cut = set()
    hq = {z.id for z in state.zones.values() if z.network == "headquarters"}
    for z in state.zones.values():
        if z.network != network:
            continue
        if z.kind == "operational":
            keep = {o.id for o in state.zones.values() if o.network == network}
        elif z.kind == "restricted":
            keep = {o.id for o in state.zones.values() if o.network == network} | hq
        else:
            continue
        cut.update(pair(z.id, other) for other in state.zones if other not in keep)
    return cut


def connectivity(state: NetworkState, phase: MissionPhase) -> ConnectivityPolicy:
    allowed = set(state.allowed_pairs)
    if phase is MissionPhase.MISSION_A:
        allowed -= _isolated_pairs(state, "deployed_A")
    elif phase is MissionPhase.MISSION_B:
        allowed -= _isolated_pairs(state, "deployed_B")
    return ConnectivityPolicy(frozenset(allowed), frozenset(state.blocked))
