"""Deterministic stand-in for a chat-completion endpoint.

Replies are keyed by step: a scripted reply or fault wins, otherwise a small
rule set reads the rendered observation and answers in the expected JSON
shape with a written reason. Fault modes exercise the Sleep fallback.
"""
from __future__ import annotations

import json
import re
import threading
import time
from typing import Optional

from ..comm import CommVector
from .observation import parse_observation

FAULTS = ("malformed", "prose", "wrong_color", "timeout")

_DEFENDS_RE = re.compile(r"^- (blue_agent_\d+) defends (.+)$", re.M)
_ALERT_RE = re.compile(r"^step \d+ (INFO|USER|ADMIN) (\S+): (.*)$")


def parse_network(system: str) -> dict[str, dict[str, list[str]]]:
    """agent -> zone -> hosts, read from the layout block of a system message."""
    layout = {}
    for agent, body in _DEFENDS_RE.findall(system):
        zones = {}
        for part in body.split("; "):
            zone, _, hosts = part.partition(": ")
            zones[zone] = [h.strip() for h in hosts.split(",") if h.strip()]
        layout[agent] = zones
    return layout


def _reply(action: str, target: Optional[str], reason: str) -> str:
    body = {"action": action, "reason": reason}
    if target is not None:
        body = {"action": action, "target": target, "reason": reason}
    return json.dumps(body)


class MockLLM:
    def __init__(self, script: Optional[dict] = None, faults: Optional[dict] = None, delay: float = 0.0):
        self.script = {int(k): v for k, v in (script or {}).items()}
        self.faults = {int(k): v for k, v in (faults or {}).items()}
        bad = [f for f in self.faults.values() if f not in FAULTS]
        if bad:
            raise ValueError(f"unknown fault mode '{bad[0]}'")
        self.delay = delay
        self._calls: dict[str, int] = {}
        self._lock = threading.Lock()

    def _next_index(self, agent: str) -> int:
        with self._lock:
            n = self._calls.get(agent, 0)
            self._calls[agent] = n + 1
            return n

    def complete(self, messages, *, model="mock", temperature=1.0, timeout=30.0,
                 step: Optional[int] = None, agent: Optional[str] = None) -> str:
        system = next((m["content"] for m in messages if m["role"] == "system"), "")
        user = next((m["content"] for m in reversed(messages) if m["role"] == "user"), "")
        try:
            obs = parse_observation(user)
        except ValueError:
            obs = None
        name = agent or (obs.agent_name if obs else "?")
        index = self._next_index(name)
        key = index if step is None else step
        if self.delay:
            time.sleep(self.delay)

        fault = self.faults.get(key)
        if fault == "timeout":
            raise TimeoutError(f"mock endpoint timed out at step {key}")
        if fault == "malformed":
            return '{"action": "Analyse", "target": '
        if fault == "prose":
            return "I think we should wait and see what happens next."
        if fault == "wrong_color":
            return _reply("Impact", None, "Taking the attacker's side by mistake.")
        if key in self.script:
            return self.script[key]
        if obs is None:
            return _reply("Sleep", None, "Could not read the report.")
        return self._heuristic(obs, parse_network(system).get(obs.agent_name, {}), index)

    @staticmethod
    def _heuristic(obs, zones: dict, index: int) -> str:
        hosts = [h for hs in zones.values() for h in hs]
        verb, _, target = obs.last_action.partition(" ")
        if obs.last_action_status == "IN_PROGRESS" and target:
            return _reply("Analyse", target,
                          f"{verb} on {target} is still in progress; analysing {target} to confirm it is set up "
                          f"correctly and to reveal early red activity.")
        if obs.last_action_status == "FALSE" and target in hosts:
            return _reply("Analyse", target,
                          f"The previous {verb} on {target} failed; analysing {target} to find the configuration "
                          f"issue or malicious activity behind the failure.")
        alerts = [m.groups() for m in map(_ALERT_RE.match, obs.suspicious_activity) if m]
        for severity, host, _ in alerts:
            if severity == "ADMIN":
                return _reply("Restore", host, f"Analysis found an admin-level compromise on {host}; restoring it "
                                               f"is the only way to evict the attacker.")
        for severity, host, _ in alerts:
            if severity == "USER":
                return _reply("Remove", host, f"Analysis found a user-level compromise on {host}; removing the "
                                              f"malicious processes.")
        if alerts:
            counts: dict = {}
            for _, host, _ in alerts:
                counts[host] = counts.get(host, 0) + 1
            host = max(sorted(counts), key=counts.get)
            return _reply("Analyse", host, f"Repeated INFO-level suspicious connections on {host}; analysing it to "
                                           f"determine whether red activity is present.")
        for vec in obs.communication_vectors:
            try:
                level = CommVector.parse(vec).level
            except ValueError:
                continue
            if level in ("user", "admin") and hosts:
                host = hosts[index % len(hosts)]
                return _reply("Remove", host, f"Another defender reports a {level}-level compromise; removing "
                                              f"possible malicious processes on {host} as a precaution.")
        if not hosts:
            return _reply("Sleep", None, "No hosts to defend.")
        host = hosts[index % len(hosts)]
        return _reply("DeployDecoy", host, f"No suspicious activity detected; proactively deploying a decoy on "
                                           f"{host} to lure potential red activity early without affecting users.")
