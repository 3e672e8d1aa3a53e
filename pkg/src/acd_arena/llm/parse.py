"""Reply parsing: pull the first JSON object out of free text and validate it."""
from __future__ import annotations

import json
import logging
from typing import Iterable, Optional

from ..actions import BLUE_VERBS, IDLE, ZONE_PAIR_VERBS, AgentAction, Decision

log = logging.getLogger(__name__)


def _balanced_end(text: str, start: int) -> Optional[int]:
    depth = 0
    in_str = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i
    return None


def extract_json_object(text: str) -> Optional[dict]:
    """First balanced ``{...}`` span in ``text`` that decodes to a JSON object."""
    start = text.find("{")
    while start != -1:
        end = _balanced_end(text, start)
        if end is not None:
            try:
                obj = json.loads(text[start:end + 1])
            except ValueError:
                obj = None
            if isinstance(obj, dict):
                return obj
        start = text.find("{", start + 1)
    return None


def _zone_pair(target) -> Optional[tuple]:
    if isinstance(target, str):
        for sep in ("->", ",", " to "):
            if sep in target:
                target = target.split(sep)
                break
    if isinstance(target, (list, tuple)) and len(target) == 2 and all(isinstance(t, str) for t in target):
        return tuple(t.strip() for t in target)
    return None


def parse_decision(reply: str, actor: str, hosts: Iterable[str] = (), zones: Iterable[str] = ()) -> Decision:
    """Never raises: anything unusable becomes an invalid Sleep with the raw text kept."""
    hosts, zones = set(hosts), set(zones)

    def invalid(why: str) -> Decision:
        log.info("invalid action from %s: %s", actor, why)
        return Decision(AgentAction(actor, IDLE), f"invalid action: {why}", False, reply)

    if not isinstance(reply, str):
        return invalid("reply is not text")
    obj = extract_json_object(reply)
    if obj is None:
        return invalid("no JSON object in reply")
    verb = obj.get("action")
    if not isinstance(verb, str) or verb not in BLUE_VERBS:
        return invalid(f"unknown action {verb!r}")
    reason = obj.get("reason", "")
    reason = reason if isinstance(reason, str) else json.dumps(reason)
    target = obj.get("target")

    if verb in ("Sleep", "Monitor"):
        return Decision(AgentAction(actor, verb), reason, True, reply)
    if verb in ZONE_PAIR_VERBS:
        zp = _zone_pair(target)
        if zp is None or (zones and not set(zp) <= zones):
            return invalid(f"bad zone pair {target!r}")
        return Decision(AgentAction(actor, verb, zp), reason, True, reply)
    if not isinstance(target, str) or (hosts and target not in hosts):
        return invalid(f"unknown host {target!r}")
    return Decision(AgentAction(actor, verb, target), reason, True, reply)
