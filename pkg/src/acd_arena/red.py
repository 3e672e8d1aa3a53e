"""Finite-state red agents.

The default agent walks a fixed loop recon -> exploit -> escalate -> act. The
four variants reorder or gate that loop:

* aggressive: loud scans first, then keeps re-sweeping zones every other step
* stealthy:   quiet scans, acts only every ``k``-th step, withdraws when noticed
* impact:     heads for admin on critical hosts and then impacts them
* degrade:    degrades green-facing services as soon as it holds a host
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .actions import IDLE, AgentAction
from .engine import RED_AGENT, RedView
from .network import Compromise

VARIANTS = ("default", "aggressive", "stealthy", "impact", "degrade")
NODES = ("recon", "exploit", "escalate", "act", "withdraw")

# next node tried after each node; unreachable nodes are skipped in order
TRANSITIONS = {
    "default": {"recon": "exploit", "exploit": "escalate", "escalate": "act", "act": "recon", "withdraw": "recon"},
    "aggressive": {"recon": "exploit", "exploit": "escalate", "escalate": "act", "act": "recon", "withdraw": "recon"},
    "stealthy": {"recon": "exploit", "exploit": "escalate", "escalate": "act", "act": "recon", "withdraw": "exploit"},
    "impact": {"recon": "exploit", "exploit": "escalate", "escalate": "act", "act": "escalate", "withdraw": "recon"},
    "degrade": {"recon": "exploit", "exploit": "act", "act": "escalate", "escalate": "recon", "withdraw": "recon"},
}

NODE_OF_VERB = {
    "Discover": "recon",
    "Exploit": "exploit",
    "PrivilegeEscalate": "escalate",
    "Impact": "act",
    "DegradeService": "act",
    "Withdraw": "withdraw",
}


def detection_profile(variant: str, stealth_interval: int = 3) -> tuple[str, float]:
    if variant not in VARIANTS:
        raise ValueError(f"unknown red variant '{variant}'")
    if variant == "stealthy":
        return "quiet", 1.0 / stealth_interval
    return "loud", 1.0


@dataclass
class RedState:
    variant: str = "default"
    footholds: dict = field(default_factory=dict)
    known_hosts: set = field(default_factory=set)
    fsm_node: str = "recon"
    sweep: int = 0


class RedAgent:
    def __init__(self, variant: str = "default", stealth_interval: int = 3,
                 withdraw_threshold: int = 2, name: str = RED_AGENT):
        self.scan_mode, self.rate = detection_profile(variant, stealth_interval)
        self.variant = variant
        self.interval = stealth_interval if variant == "stealthy" else 1
        self.withdraw_threshold = withdraw_threshold
        self.name = name
        self.state = RedState(variant=variant)

    def _act(self, verb: str, target=None, option=None) -> AgentAction:
        if verb != IDLE:
            self.state.fsm_node = NODE_OF_VERB[verb]
        return AgentAction(self.name, verb, target, option)

    def idle(self) -> AgentAction:
        return AgentAction(self.name, IDLE)

    # -- candidate targets ------------------------------------------------

    @staticmethod
    def _exploitable(view: RedView) -> list[str]:
        return [
            h for h, intel in sorted(view.known.items())
            if h not in view.footholds and h not in view.abandoned and intel.zone in view.reachable_zones
        ]

    @staticmethod
    def _at(view: RedView, level: Compromise) -> list[str]:
        return sorted(h for h, lvl in view.footholds.items() if lvl == level)

    def _node_action(self, node: str, view: RedView, rng: np.random.Generator):
        if node == "recon" and view.unscanned_zones:
            return self._act("Discover", view.unscanned_zones[0], self.scan_mode)
        if node == "exploit":
            targets = self._exploitable(view)
            if targets:
                return self._act("Exploit", targets[int(rng.integers(len(targets)))])
        if node == "escalate":
            users = self._at(view, Compromise.USER)
            if users:
                return self._act("PrivilegeEscalate", users[0])
        if node == "act":
            admins = self._at(view, Compromise.ADMIN)
            if admins:
                admins.sort(key=lambda h: (not view.known.get(h) or not view.known[h].critical, h))
                return self._act("Impact", admins[0])
        return None

    def _loop(self, view: RedView, rng: np.random.Generator, start: str = None) -> AgentAction:
        table = TRANSITIONS[self.variant]
        node = start or table[self.state.fsm_node]
        for _ in range(len(NODES)):
            action = self._node_action(node, view, rng)
            if action is not None:
                return action
            node = table[node]
        return self.idle()

    # -- policy -----------------------------------------------------------

    def next_action(self, view: RedView, rng: np.random.Generator) -> AgentAction:
        st = self.state
        st.footholds = dict(view.footholds)
        st.known_hosts = set(view.known)
        if not view.footholds:
            return self.idle()
        if view.step % self.interval:
            return self.idle()
        return getattr(self, f"_{self.variant}")(view, rng)

    def _default(self, view, rng):
        return self._loop(view, rng)

    def _aggressive(self, view, rng):
        if view.unscanned_zones:
            return self._act("Discover", view.unscanned_zones[0], "loud")
        self.state.sweep += 1
        if self.state.sweep % 2 and view.reachable_zones:
            zones = sorted(view.reachable_zones)
            return self._act("Discover", zones[(self.state.sweep // 2) % len(zones)], "loud")
        return self._loop(view, rng, start="exploit")

    def _stealthy(self, view, rng):
        counts = view.alert_counts
        if len(view.footholds) >= 2 and counts:
            hot = max(sorted(counts), key=lambda h: counts[h])
            if counts[hot] >= self.withdraw_threshold:
                return self._act("Withdraw", hot)
        # exploit what is already known, then scan quietly, and only then act
        for node in ("exploit", "escalate", "recon", "act"):
            action = self._node_action(node, view, rng)
            if action is not None:
                return action
        return self.idle()

    def _impact(self, view, rng):
        critical = {h for h, intel in view.known.items() if intel.critical}
        admins = [h for h in self._at(view, Compromise.ADMIN) if h in critical]
        if admins:
            return self._act("Impact", admins[0])
        users = [h for h in self._at(view, Compromise.USER) if h in critical]
        if users:
            return self._act("PrivilegeEscalate", users[0])
        targets = self._exploitable(view)
        crit_targets = [h for h in targets if h in critical]
        if crit_targets:
            return self._act("Exploit", crit_targets[0])
        if view.unscanned_zones:
            zones = sorted(view.unscanned_zones, key=lambda z: (view.zone_kinds.get(z) != "operational", z))
            return self._act("Discover", zones[0], "loud")
        # no critical host in reach: widen the foothold set toward operational zones
        if targets:
            ranked = sorted(targets, key=lambda h: (view.known[h].zone.startswith("hq") or
                                                    view.known[h].zone == "contractor", h))
            return self._act("Exploit", ranked[0])
        return self._loop(view, rng)

    def _degrade(self, view, rng):
        serving = {h for h, intel in view.known.items() if intel.serves_green}
        for h in sorted(view.footholds):
            if h in serving and h not in view.degraded:
                return self._act("DegradeService", h)
        targets = [h for h in self._exploitable(view) if h in serving]
        if targets:
            return self._act("Exploit", targets[int(rng.integers(len(targets)))])
        if view.unscanned_zones:
            return self._act("Discover", view.unscanned_zones[0], "loud")
        return self._loop(view, rng)
