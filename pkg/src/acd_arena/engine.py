"""Discrete-step episode engine.

Each step resolves actions in a fixed order (red, green, blue), then emits
alerts and a penalty-only reward. Multi-step blue actions occupy their agent
until they finish; anything the agent submits meanwhile is dropped and the
step reports ``IN_PROGRESS``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

from .actions import (
    HOST_VERBS,
    IDLE,
    ZONE_PAIR_VERBS,
    ActionStatus,
    AgentAction,
    color_of,
    is_color_valid,
)
from .config import N_BLUE, RewardWeights, ScenarioConfig
from .network import (
    Compromise,
    ConnectivityPolicy,
    MissionPhase,
    NetworkState,
    blue_index,
    blue_name,
    build_topology,
    connectivity,
    pair,
    phase_at,
)

log = logging.getLogger(__name__)

RED_AGENT = "red_agent_0"


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *stream]))


class Severity(IntEnum):
    INFO = 1
    USER = 2
    ADMIN = 3


@dataclass(frozen=True)
class Alert:
    step: int
    observer: str
    host: str
    severity: Severity
    source_zone: Optional[str]
    description: str

    def render(self) -> str:
        return f"step {self.step} {self.severity.name} {self.host}: {self.description}"

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "observer": self.observer,
            "host": self.host,
            "severity": self.severity.name,
            "source_zone": self.source_zone,
            "description": self.description,
        }


@dataclass
class RewardRecord:
    step: int
    green_failures: int = 0
    impact_penalties: int = 0
    restore_downtime_penalties: int = 0
    block_denials: int = 0
    critical_impacts: int = 0
    total: float = 0.0


@dataclass
class PenaltyEvents:
    """Penalty-relevant counts gathered during one step."""

    step: int = 0
    phase: MissionPhase = MissionPhase.PLANNING
    green_failures: int = 0
    impacts: int = 0
    critical_impacts: int = 0
    downtime_steps: int = 0
    block_denials: int = 0


def reward(events: PenaltyEvents, weights: RewardWeights) -> RewardRecord:
    weights.check()
    plain_impacts = events.impacts - events.critical_impacts
    raw = (
        weights.green * events.green_failures
        + weights.impact * plain_impacts
        + weights.impact_critical * events.critical_impacts
        + weights.restore * events.downtime_steps
        + weights.block * events.block_denials
    )
    mult = weights.phase_multipliers.get(events.phase.value, 1.0)
    total = -mult * raw
    return RewardRecord(
        step=events.step,
        green_failures=events.green_failures,
        impact_penalties=events.impacts,
        restore_downtime_penalties=events.downtime_steps,
        block_denials=events.block_denials,
        critical_impacts=events.critical_impacts,
        total=total + 0.0,
    )


@dataclass
class RedEvent:
    verb: str
    target: object
    status: ActionStatus
    source_zone: Optional[str] = None
    hosts: tuple = ()
    mode: str = "loud"
    decoy: Optional[str] = None


@dataclass(frozen=True)
class GreenAccess:
    green: str
    verb: str
    host: str
    source_zone: Optional[str]
    ok: bool
    blocked: bool = False


@dataclass
class GreenResult:
    failures: int = 0
    block_denials: int = 0
    accesses: list = field(default_factory=list)
    phishing_grants: list = field(default_factory=list)


@dataclass
class Pending:
    action: AgentAction
    remaining: int
    decoy: Optional[str] = None


@dataclass
class Observation:
    agent: str
    index: int
    step: int
    phase: MissionPhase
    zones: tuple
    hosts: tuple
    peer_zones: dict
    last_action: Optional[AgentAction]
    last_status: ActionStatus
    alerts: list
    beliefs: dict
    busy: bool
    comm_vectors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "agent": self.agent,
            "index": self.index,
            "step": self.step,
            "phase": self.phase.value,
            "zones": list(self.zones),
            "hosts": list(self.hosts),
            "peer_zones": {str(k): list(v) for k, v in self.peer_zones.items()},
            "last_action": self.last_action.to_dict() if self.last_action else None,
            "last_status": self.last_status.value,
            "alerts": [a.to_dict() for a in self.alerts],
            "beliefs": {h: c.label for h, c in self.beliefs.items()},
            "busy": self.busy,
            "comm_vectors": [str(v) for v in self.comm_vectors],
        }


@dataclass(frozen=True)
class HostIntel:
    zone: str
    services: tuple
    critical: bool
    serves_green: bool


@dataclass
class RedView:
    step: int
    phase: MissionPhase
    footholds: dict
    known: dict
    reachable_zones: frozenset
    unscanned_zones: tuple
    abandoned: frozenset
    degraded: frozenset
    alert_counts: dict
    zone_kinds: dict
    last_status: ActionStatus = ActionStatus.UNKNOWN


@dataclass
class StepResult:
    observations: dict
    red_view: RedView
    reward: RewardRecord
    statuses: dict
    alerts: list
    green: GreenResult
    red_event: Optional[RedEvent]


class Engine:
    def __init__(self, config: ScenarioConfig, seed: Optional[int] = None, episode: int = 0):
        config.check()
        self.config = config
        self.seed = config.seed if seed is None else seed
        self.rng = make_rng(self.seed, episode, 0)
        self.state = build_topology(config)
        self.probs = config.probabilities
        self.dur = config.durations
        self.pending: dict[str, Pending] = {}
        self.last_action: dict[str, Optional[AgentAction]] = {blue_name(i): None for i in range(N_BLUE)}
        self.beliefs: dict[str, dict] = {blue_name(i): {} for i in range(N_BLUE)}
        self.red_alerts: dict[str, int] = {}
        self.red_status = ActionStatus.UNKNOWN
        self.greens = sorted(
            h.id for h in self.state.hosts.values() if self.state.zones[h.zone].guardian is not None
        )
        self._step_alerts: list[Alert] = []
        self._analysed: list[tuple] = []

    # -- helpers ----------------------------------------------------------

    @property
    def step_index(self) -> int:
        return self.state.step

    def phase(self) -> MissionPhase:
        # clamp so the observation emitted after the last step stays defined
        return phase_at(min(self.state.step, self.config.steps - 1), self.config)

    def policy(self) -> ConnectivityPolicy:
        return connectivity(self.state, self.phase())

    def _clean(self, host) -> None:
        host.compromise = Compromise.CLEAN
        host.degraded = False
        self.state.abandoned.discard(host.id)
        self.red_alerts.pop(host.id, None)
        for beliefs in self.beliefs.values():
            beliefs.pop(host.id, None)

    def _source_for(self, target_zone: str, policy: ConnectivityPolicy) -> Optional[str]:
        step = self.state.step
        for hid in sorted(self.state.red_footholds()):
            host = self.state.hosts[hid]
            if host.available(step) and policy.permits(host.zone, target_zone):
                return host.zone
        return None

    # -- red --------------------------------------------------------------

    def resolve_red(self, action: AgentAction, policy: ConnectivityPolicy) -> RedEvent:
        st = self.state
        step = st.step
        verb, target = action.verb, action.target
        event = RedEvent(verb, target, ActionStatus.FALSE)
        if verb == IDLE:
            event.status = ActionStatus.TRUE
            return event

        if verb == "Discover":
            if target not in st.zones:
                return event
            src = self._source_for(target, policy)
            if src is None:
                return event
            event.source_zone = src
            event.mode = action.option or "loud"
            zone_hosts = sorted(h.id for h in st.hosts_in(target))
            if event.mode == "quiet":
                unknown = [h for h in zone_hosts if h not in st.red_known]
                pool = unknown or zone_hosts
                found = [pool[int(self.rng.integers(len(pool)))]]
            else:
                found = zone_hosts
            st.red_known.update(found)
            event.hosts = tuple(found)
            event.status = ActionStatus.TRUE
            return event

        host = st.hosts.get(target) if isinstance(target, str) else None
        if host is None or not host.available(step):
            return event
        event.hosts = (host.id,)
        footholds = st.red_footholds()

        if verb == "Exploit":
            if host.id not in st.red_known or host.compromise > Compromise.CLEAN:
                return event
            src = self._source_for(host.zone, policy)
            if src is None:
                return event
            event.source_zone = src
            surface = sorted(host.services | host.decoys)
            if action.option in surface:
                service = action.option
            else:
                service = surface[int(self.rng.integers(len(surface)))]
            if service in host.decoys:
                event.decoy = service
                return event
            host.compromise = Compromise.USER
            event.status = ActionStatus.TRUE
            return event

        level = footholds.get(host.id)
        if level is None:
            return event
        event.source_zone = host.zone
        if verb == "PrivilegeEscalate":
            if level == Compromise.USER:
                host.compromise = Compromise.ADMIN
                event.status = ActionStatus.TRUE
        elif verb == "Impact":
            if level == Compromise.ADMIN:
                event.status = ActionStatus.TRUE
        elif verb == "DegradeService":
            host.degraded = True
            event.status = ActionStatus.TRUE
        elif verb == "Withdraw":
            st.abandoned.add(host.id)
            event.status = ActionStatus.TRUE
        return event

    # -- green ------------------------------------------------------------

    def resolve_green(self, policy: Optional[ConnectivityPolicy] = None) -> GreenResult:
        st = self.state
        step = st.step
        policy = policy or self.policy()
        result = GreenResult()
        servers = sorted(h.id for h in st.hosts.values() if h.serves_green)
        for hid in self.greens:
            home = st.hosts[hid]
            green = f"green_agent_{hid}"
            if self.rng.random() < self.probs.green_local_work:
                ok = home.available(step)
                result.accesses.append(GreenAccess(green, "LocalWork", hid, None, ok))
                if not ok:
                    result.failures += 1
            else:
                options = [s for s in servers if s != hid and policy.phase_permits(home.zone, st.hosts[s].zone)]
                if options:
                    tgt = st.hosts[options[int(self.rng.integers(len(options)))]]
                    blocked = tgt.zone != home.zone and pair(home.zone, tgt.zone) in policy.blocked_overrides
                    ok = tgt.available(step) and not tgt.degraded and not blocked
                    result.accesses.append(GreenAccess(green, "AccessService", tgt.id, home.zone, ok, blocked))
                    if not ok:
                        result.failures += 1
                        result.block_denials += int(blocked)
            if self.rng.random() < self.probs.p_phish:
                clean = sorted(
                    h.id for h in st.hosts.values() if h.compromise == Compromise.CLEAN and h.available(step)
                )
                if clean:
                    victim = st.hosts[clean[int(self.rng.integers(len(clean)))]]
                    victim.compromise = Compromise.USER
                    st.red_known.add(victim.id)
                    result.phishing_grants.append(victim.id)
        return result

    # -- blue -------------------------------------------------------------

    def _owns(self, agent: str, host_id) -> bool:
        return (
            isinstance(host_id, str)
            and host_id in self.state.hosts
            and self.state.guardian_of(host_id) == blue_index(agent)
        )

    def resolve_blue_action(self, action: AgentAction) -> ActionStatus:
        """Start (or instantly apply) a blue action submitted by a free agent."""
        st = self.state
        step = st.step
        agent, verb, target = action.actor, action.verb, action.target
        if verb in ("Sleep", "Monitor"):
            return ActionStatus.TRUE

        if verb in ZONE_PAIR_VERBS:
            a, b = target
            own = set(st.zones_of(blue_index(agent)))
            if a not in st.zones or b not in st.zones or a == b or not ({a, b} & own):
                return ActionStatus.FALSE
            if verb == "BlockTrafficZone":
                st.blocked.add(pair(a, b))
            else:
                st.blocked.discard(pair(a, b))
            return ActionStatus.TRUE

        if verb not in HOST_VERBS or not self._owns(agent, target):
            return ActionStatus.FALSE
        host = st.hosts[target]

        if verb == "Remove":
            if not host.available(step):
                return ActionStatus.FALSE
            if host.compromise == Compromise.ADMIN:
                return ActionStatus.FALSE
            if host.compromise == Compromise.USER:
                self._clean(host)
            self.beliefs[agent].pop(host.id, None)
            return ActionStatus.TRUE

        if verb == "Analyse":
            if not host.available(step):
                return ActionStatus.FALSE
            return self._start(agent, Pending(action, self.dur.analyse - 1))

        if verb == "DeployDecoy":
            decoy = self._decoy_choice(host, action.option)
            if decoy is None or not host.available(step):
                return ActionStatus.FALSE
            return self._start(agent, Pending(action, self.dur.deploy_decoy - 1, decoy))

        # Restore: host goes offline now and stays down after the rebuild
        host.unavailable_until = step + self.dur.restore + self.dur.restore_downtime - 1
        return self._start(agent, Pending(action, self.dur.restore - 1))

    def _decoy_choice(self, host, requested: Optional[str]) -> Optional[str]:
        catalogue = self.dur.decoy_catalogue
        taken = host.decoys | host.services
        if requested is not None:
            return requested if requested in catalogue and requested not in taken else None
        for name in catalogue:
            if name not in taken:
                return name
        return None

    def _start(self, agent: str, pending: Pending) -> ActionStatus:
        if pending.remaining <= 0:
            return self._complete(agent, pending)
        self.pending[agent] = pending
        return ActionStatus.IN_PROGRESS

    def _complete(self, agent: str, pending: Pending) -> ActionStatus:
        host = self.state.hosts[pending.action.target]
        verb = pending.action.verb
        if verb == "Analyse":
            self._analysed.append((agent, host.id, host.compromise))
            if host.compromise > Compromise.CLEAN:
                self.beliefs[agent][host.id] = host.compromise
            else:
                self.beliefs[agent].pop(host.id, None)
            return ActionStatus.TRUE
        if verb == "DeployDecoy":
            if pending.decoy in host.decoys | host.services:
                return ActionStatus.FALSE
            host.decoys.add(pending.decoy)
            return ActionStatus.TRUE
        # Restore
        self._clean(host)
        host.decoys.clear()
        return ActionStatus.TRUE

    def _tick_blue(self, actions: dict) -> dict:
        statuses = {}
        for i in range(N_BLUE):
            agent = blue_name(i)
            action = actions.get(agent) or AgentAction(agent, IDLE)
            pending = self.pending.get(agent)
            if pending is not None:
                pending.remaining -= 1
                if pending.remaining <= 0:
                    del self.pending[agent]
                    statuses[agent] = self._complete(agent, pending)
                else:
                    statuses[agent] = ActionStatus.IN_PROGRESS
                continue
            statuses[agent] = self.resolve_blue_action(action)
            self.last_action[agent] = action
        return statuses

    # -- alerts -----------------------------------------------------------

    def _alert(self, host_id: str, severity: Severity, source: Optional[str], text: str) -> Optional[Alert]:
        guardian = self.state.guardian_of(host_id)
        if guardian is None:
            return None
        alert = Alert(self.state.step, blue_name(guardian), host_id, severity, source, text)
        self._step_alerts.append(alert)
        if host_id in self.state.red_footholds():
            self.red_alerts[host_id] = self.red_alerts.get(host_id, 0) + 1
        return alert

    def generate_alerts(self, red_event: Optional[RedEvent], green: GreenResult) -> list:
        p = self.probs
        if red_event is not None and red_event.hosts and red_event.source_zone is not None:
            src = red_event.source_zone
            verb = red_event.verb
            if verb == "Discover":
                prob = p.detect_scan_quiet if red_event.mode == "quiet" else p.detect_scan
                if self.rng.random() < prob:
                    hosts = red_event.hosts
                    hid = hosts[int(self.rng.integers(len(hosts)))]
                    self._alert(hid, Severity.INFO, src, f"network scan from {src}")
            elif verb == "Exploit" and red_event.decoy is not None:
                if self.rng.random() < p.detect_decoy:
                    self._alert(red_event.hosts[0], Severity.INFO, src,
                                f"connection to decoy {red_event.decoy} from {src}")
            elif verb in ("Exploit", "PrivilegeEscalate", "DegradeService", "Impact"):
                if self.rng.random() < p.detect_exploit:
                    text = f"suspicious connection from {src}" if verb == "Exploit" else "suspicious process activity"
                    self._alert(red_event.hosts[0], Severity.INFO, src, text)
        for access in green.accesses:
            if self.rng.random() < p.fp_green:
                if access.verb == "AccessService":
                    self._alert(access.host, Severity.INFO, access.source_zone,
                                f"suspicious connection from {access.source_zone}")
                else:
                    self._alert(access.host, Severity.INFO, None, "suspicious process activity")
        for agent, hid, level in self._analysed:
            if level == Compromise.ADMIN:
                self._alert(hid, Severity.ADMIN, None, "analysis found admin-level compromise")
            elif level == Compromise.USER:
                self._alert(hid, Severity.USER, None, "analysis found user-level compromise")
        self._analysed = []
        return list(self._step_alerts)

    # -- step -------------------------------------------------------------

    def observe(self) -> dict:
        return self._observations({}, [])

    def _observations(self, statuses: dict, alerts: list) -> dict:
        st = self.state
        peer_zones = {i: tuple(st.zones_of(i)) for i in range(N_BLUE)}
        obs = {}
        for i in range(N_BLUE):
            agent = blue_name(i)
            mine = sorted((a for a in alerts if a.observer == agent), key=lambda a: (a.step, a.host))
            pending = self.pending.get(agent)
            obs[agent] = Observation(
                agent=agent,
                index=i,
                step=st.step,
                phase=self.phase(),
                zones=peer_zones[i],
                hosts=tuple(st.hosts_of(i)),
                peer_zones=peer_zones,
                last_action=pending.action if pending else self.last_action[agent],
                last_status=statuses.get(agent, ActionStatus.UNKNOWN),
                alerts=mine,
                beliefs=dict(self.beliefs[agent]),
                busy=pending is not None,
            )
        return obs

    def red_view(self) -> RedView:
        st = self.state
        policy = self.policy()
        footholds = st.red_footholds()
        step = st.step
        sources = {st.hosts[h].zone for h in footholds if st.hosts[h].available(step)}
        reachable = frozenset(z for z in st.zones if any(policy.permits(s, z) for s in sources))
        known = {}
        for hid in sorted(st.red_known):
            h = st.hosts[hid]
            known[hid] = HostIntel(h.zone, tuple(sorted(h.services | h.decoys)), h.critical, h.serves_green)
        unscanned = tuple(
            sorted(z for z in reachable if any(h.id not in st.red_known for h in st.hosts_in(z)))
        )
        return RedView(
            step=step,
            phase=self.phase(),
            footholds=footholds,
            known=known,
            reachable_zones=reachable,
            unscanned_zones=unscanned,
            abandoned=frozenset(st.abandoned),
            degraded=frozenset(h for h in footholds if st.hosts[h].degraded),
            alert_counts={h: n for h, n in self.red_alerts.items() if h in footholds},
            zone_kinds={z.id: z.kind for z in st.zones.values()},
            last_status=self.red_status,
        )

    def step(self, actions: dict) -> StepResult:
        st = self.state
        if st.step >= self.config.steps:
            raise RuntimeError("episode already finished")
        for agent, action in actions.items():
            if action.actor != agent or not is_color_valid(action):
                raise ValueError(f"colour-invalid action for {agent}: {action}")
        phase = self.phase()
        policy = self.policy()
        self._step_alerts = []

        red_action = actions.get(RED_AGENT)
        red_event = self.resolve_red(red_action, policy) if red_action is not None else None
        if red_event is not None:
            self.red_status = red_event.status

        green = self.resolve_green(policy)
        statuses = self._tick_blue(actions)
        alerts = self.generate_alerts(red_event, green)

        downtime = sum(1 for h in st.hosts.values() if not h.available(st.step))
        impact = red_event is not None and red_event.verb == "Impact" and red_event.status == ActionStatus.TRUE
        critical = impact and st.hosts[red_event.target].critical
        events = PenaltyEvents(
            step=st.step,
            phase=phase,
            green_failures=green.failures - green.block_denials,
            impacts=int(impact),
            critical_impacts=int(critical),
            downtime_steps=downtime,
            block_denials=green.block_denials,
        )
        record = reward(events, self.config.rewards)
        if red_event is not None:
            statuses[RED_AGENT] = red_event.status

        st.step += 1
        obs = self._observations(statuses, alerts)
        return StepResult(obs, self.red_view(), record, statuses, alerts, green, red_event)

    @property
    def done(self) -> bool:
        return self.state.step >= self.config.steps


def is_blue(agent: str) -> bool:
    return color_of(agent) == "blue"
