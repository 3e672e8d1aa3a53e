"""Non-LLM defender policies."""
from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .actions import BLUE_VERBS, IDLE, ZONE_PAIR_VERBS, AgentAction, Decision
from .comm import CommVector
from .engine import Observation, Severity

log = logging.getLogger(__name__)


def sleep_policy(observation: Observation) -> AgentAction:
    return AgentAction(observation.agent, IDLE)


class SleepPolicy:
    kind = "sleep"

    def __init__(self, delay: float = 0.0):
        self.delay = delay

    def decide(self, observation: Observation) -> Decision:
        if self.delay:
            time.sleep(self.delay)
        return Decision(sleep_policy(observation))


@dataclass
class ReactiveMemory:
    info_counts: dict = field(default_factory=dict)
    admin_hosts: list = field(default_factory=list)
    user_hosts: list = field(default_factory=list)
    # peer index -> zone pair we blocked because of it
    blocks: dict = field(default_factory=dict)


def _peer_indices(observation: Observation) -> list[int]:
    return [j for j in sorted(observation.peer_zones) if j != observation.index]


def reactive_policy(observation: Observation, memory: ReactiveMemory,
                    info_threshold: int = 2) -> tuple[AgentAction, str]:
    """Priority ladder: restore admin, remove user, analyse noisy hosts, fence off admin-level peers."""
    me = observation.agent
    for alert in observation.alerts:
        if alert.severity == Severity.ADMIN and alert.host not in memory.admin_hosts:
            memory.admin_hosts.append(alert.host)
        elif alert.severity == Severity.USER and alert.host not in memory.user_hosts:
            memory.user_hosts.append(alert.host)
        elif alert.severity == Severity.INFO:
            memory.info_counts[alert.host] = memory.info_counts.get(alert.host, 0) + 1

    if memory.admin_hosts:
        host = memory.admin_hosts.pop(0)
        memory.info_counts.pop(host, None)
        return AgentAction(me, "Restore", host), f"ADMIN alert on {host}; restoring it"
    if memory.user_hosts:
        host = memory.user_hosts.pop(0)
        memory.info_counts.pop(host, None)
        return AgentAction(me, "Remove", host), f"USER alert on {host}; removing the foothold"
    noisy = sorted((h for h, n in memory.info_counts.items() if n >= info_threshold),
                   key=lambda h: (-memory.info_counts[h], h))
    if noisy:
        host = noisy[0]
        memory.info_counts.pop(host)
        return AgentAction(me, "Analyse", host), f"repeated INFO alerts on {host}; analysing"

    peers = _peer_indices(observation)
    levels = {}
    for j, vec in zip(peers, observation.comm_vectors):
        levels[j] = CommVector(tuple(vec.bits if isinstance(vec, CommVector) else vec)).level
    own = observation.zones[0] if observation.zones else None
    for j in peers:
        if levels.get(j) == "admin" and j not in memory.blocks and own and observation.peer_zones[j]:
            target = (own, observation.peer_zones[j][0])
            memory.blocks[j] = target
            return AgentAction(me, "BlockTrafficZone", target), f"blue_agent_{j} reports admin compromise"
    for j in sorted(memory.blocks):
        if levels.get(j) != "admin":
            target = memory.blocks.pop(j)
            return AgentAction(me, "AllowTrafficZone", target), f"blue_agent_{j} no longer reports admin"
    return AgentAction(me, IDLE), ""


class ReactivePolicy:
    kind = "reactive"

    def __init__(self, info_threshold: int = 2, delay: float = 0.0):
        self.info_threshold = info_threshold
        self.delay = delay
        self.memory = ReactiveMemory()

    def decide(self, observation: Observation) -> Decision:
        if self.delay:
            time.sleep(self.delay)
        action, reason = reactive_policy(observation, self.memory, self.info_threshold)
        return Decision(action, reason)


def action_from_reply(agent: str, reply: dict) -> AgentAction:
    """Build a blue action from a ``{verb, target}`` mapping; raises ValueError when unusable."""
    verb = reply.get("verb")
    if verb not in BLUE_VERBS:
        raise ValueError(f"'{verb}' is not a blue action")
    target = reply.get("target")
    if verb in ZONE_PAIR_VERBS:
        if isinstance(target, str):
            target = [t.strip() for t in target.replace("->", ",").split(",")]
        if not isinstance(target, (list, tuple)) or len(target) != 2:
            raise ValueError(f"{verb} needs a zone pair")
        target = tuple(str(t) for t in target)
    elif target is not None and not isinstance(target, str):
        raise ValueError("target must be a host id")
    return AgentAction(agent, verb, target if verb != IDLE else None, reply.get("option"))


def parse_address(address: str):
    if address.startswith("unix:"):
        return socket.AF_UNIX, address[5:]
    host, _, port = address.rpartition(":")
    return socket.AF_INET, (host or "127.0.0.1", int(port))


class RemotePolicy:
    """Forwards observations as newline-delimited JSON to an external policy process."""

    kind = "remote"

    def __init__(self, address: str, timeout: float = 1.0):
        self.address = address
        self.timeout = timeout
        self.failures = 0

    def _fallback(self, observation: Observation, why: str, raw: str = "") -> Decision:
        self.failures += 1
        log.warning("remote policy %s for %s: %s; sleeping", self.address, observation.agent, why)
        return Decision(AgentAction(observation.agent, IDLE), f"invalid action: {why}", False, raw)

    def decide(self, observation: Observation) -> Decision:
        family, addr = parse_address(self.address)
        payload = json.dumps(observation.to_dict(), sort_keys=True) + "\n"
        try:
            with socket.socket(family, socket.SOCK_STREAM) as sock:
                sock.settimeout(self.timeout)
                sock.connect(addr)
                sock.sendall(payload.encode())
                buf = b""
                while not buf.endswith(b"\n"):
                    chunk = sock.recv(65536)
                    if not chunk:
                        break
                    buf += chunk
        except socket.timeout:
            return self._fallback(observation, "timeout")
        except OSError as err:
            return self._fallback(observation, f"connection failed ({err})")
        raw = buf.decode(errors="replace").strip()
        try:
            reply = json.loads(raw)
            if not isinstance(reply, dict):
                raise ValueError("reply is not an object")
            action = action_from_reply(observation.agent, reply)
        except ValueError as err:
            return self._fallback(observation, f"malformed reply ({err})", raw)
        return Decision(action, str(reply.get("reason", "")), True, raw)


class _PolicyHandler(socketserver.StreamRequestHandler):
    def handle(self):
        line = self.rfile.readline()
        if not line:
            return
        reply = self.server.decide(json.loads(line))
        self.wfile.write((json.dumps(reply) + "\n").encode())


class _Server(socketserver.ThreadingMixIn, socketserver.TCPServer):
    daemon_threads = True
    allow_reuse_address = True


def serve_policy(decide: Callable[[dict], dict], host: str = "127.0.0.1", port: int = 0):
    """Run ``decide(observation_dict) -> {verb, target}`` behind a local socket.

    Returns ``(server, address)``; call ``server.shutdown()`` when done.
    """
    server = _Server((host, port), _PolicyHandler)
    server.decide = decide
    threading.Thread(target=server.serve_forever, daemon=True).start()
    h, p = server.server_address[:2]
    return server, f"{h}:{p}"


def make_policy(binding, *, llm_factory: Optional[Callable] = None, index: int = 0):
    kind = binding.kind
    if kind == "sleep":
        return SleepPolicy(binding.delay)
    if kind == "reactive":
        return ReactivePolicy(binding.info_threshold, binding.delay)
    if kind == "remote":
        if not binding.address:
            raise ValueError(f"blue[{index}].address: remote policy needs an address")
        return RemotePolicy(binding.address, binding.timeout)
    if kind == "llm":
        if llm_factory is None:
            raise ValueError("llm policy requested without an adapter factory")
        return llm_factory(binding, index)
    raise ValueError(f"unknown policy kind '{kind}'")
