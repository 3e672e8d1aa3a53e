import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acd_arena.actions import ActionStatus, AgentAction
from acd_arena.config import ConfigError, RewardWeights
from acd_arena.engine import RED_AGENT, Engine, PenaltyEvents, Severity, reward
from acd_arena.network import Compromise, MissionPhase, blue_name, pair

from conftest import make_config

QUIET = {"p_phish": 0.0, "fp_green": 0.0, "green_local_work": 1.0}


def b(i, verb, target=None, option=None):
    return AgentAction(blue_name(i), verb, target, option)


def r(verb, target=None, option=None):
    return AgentAction(RED_AGENT, verb, target, option)


def sleeps(**extra):
    acts = {blue_name(i): b(i, "Sleep") for i in range(5)}
    acts.update(extra)
    return acts


def quiet_engine(**probs):
    return Engine(make_config(probabilities={**QUIET, **probs}))


# -- step examples ---------------------------------------------------------

def test_all_idle_zero_reward():
    eng = quiet_engine()
    for _ in range(20):
        res = eng.step(sleeps(**{RED_AGENT: r("Sleep")}))
        assert res.reward.total == 0.0


def test_impact_on_critical_host_counts():
    eng = quiet_engine()
    host = eng.state.hosts["deployed_a_operational_host_0"]
    assert host.critical
    host.compromise = Compromise.ADMIN
    res = eng.step(sleeps(**{RED_AGENT: r("Impact", host.id)}))
    assert res.statuses[RED_AGENT] is ActionStatus.TRUE
    assert res.reward.impact_penalties == 1 and res.reward.critical_impacts == 1
    assert res.reward.total == -10.0  # planning multiplier 1, critical weight 10


def test_impact_needs_admin():
    eng = quiet_engine()
    res = eng.step(sleeps(**{RED_AGENT: r("Impact", "contractor_host_0")}))
    assert res.statuses[RED_AGENT] is ActionStatus.FALSE
    assert res.reward.impact_penalties == 0


def test_restore_timeline():
    eng = quiet_engine()
    cfg = eng.config.durations
    hid = "deployed_a_operational_host_1"
    eng.state.hosts[hid].compromise = Compromise.ADMIN
    t0 = eng.state.step
    res = eng.step(sleeps(**{blue_name(1): b(1, "Restore", hid)}))
    assert res.statuses[blue_name(1)] is ActionStatus.IN_PROGRESS
    downtime = [res.reward.restore_downtime_penalties]
    for k in range(1, 15):
        res = eng.step(sleeps())
        downtime.append(res.reward.restore_downtime_penalties)
        h = eng.state.hosts[hid]
        if k < cfg.restore - 1:
            assert h.compromise == Compromise.ADMIN
            assert res.statuses[blue_name(1)] is ActionStatus.IN_PROGRESS
        elif k == cfg.restore - 1:
            assert h.compromise == Compromise.CLEAN
            assert res.statuses[blue_name(1)] is ActionStatus.TRUE
    total_down = cfg.restore + cfg.restore_downtime
    assert downtime == [1] * total_down + [0] * (15 - total_down)
    assert eng.state.hosts[hid].unavailable_until == t0 + total_down - 1


def test_busy_agent_drops_submissions():
    eng = quiet_engine()
    eng.step(sleeps(**{blue_name(0): b(0, "Analyse", "deployed_a_restricted_host_0")}))
    res = eng.step(sleeps(**{blue_name(0): b(0, "Remove", "deployed_a_restricted_host_1")}))
    assert res.statuses[blue_name(0)] is ActionStatus.TRUE  # the Analyse finishing
    obs = res.observations[blue_name(0)]
    assert obs.last_action.verb == "Analyse" and not obs.busy


def test_observation_busy_flag():
    eng = quiet_engine()
    res = eng.step(sleeps(**{blue_name(4): b(4, "DeployDecoy", "hq_admin_host_0")}))
    obs = res.observations[blue_name(4)]
    assert obs.busy and obs.last_status is ActionStatus.IN_PROGRESS


def test_unknown_targets_fail_softly():
    eng = quiet_engine()
    res = eng.step(sleeps(**{
        blue_name(0): b(0, "Analyse", "no_such_host"),
        blue_name(1): b(1, "BlockTrafficZone", ("deployed_a_operational", "atlantis")),
        RED_AGENT: r("Exploit", "no_such_host"),
    }))
    assert res.statuses[blue_name(0)] is ActionStatus.FALSE
    assert res.statuses[blue_name(1)] is ActionStatus.FALSE
    assert res.statuses[RED_AGENT] is ActionStatus.FALSE


def test_foreign_zone_target_false():
    eng = quiet_engine()
    res = eng.step(sleeps(**{blue_name(0): b(0, "Remove", "hq_office_host_0")}))
    assert res.statuses[blue_name(0)] is ActionStatus.FALSE


def test_colour_invalid_rejected():
    eng = quiet_engine()
    with pytest.raises(ValueError):
        eng.step(sleeps(**{blue_name(0): AgentAction(blue_name(0), "Impact", "hq_office_host_0")}))


def test_episode_end():
    eng = Engine(make_config(steps=2))
    eng.step(sleeps())
    eng.step(sleeps())
    assert eng.done
    with pytest.raises(RuntimeError):
        eng.step(sleeps())


# -- green -------------------------------------------------------------------

def test_no_phishing_at_zero():
    eng = Engine(make_config(probabilities={"p_phish": 0.0}))
    for _ in range(50):
        assert eng.step(sleeps()).green.phishing_grants == []


def test_phishing_certain_single_clean_host():
    eng = Engine(make_config(probabilities={"p_phish": 1.0}))
    clean = "hq_office_host_1"
    for h in eng.state.hosts.values():
        if h.id != clean:
            h.compromise = max(h.compromise, Compromise.USER)
    res = eng.step(sleeps())
    assert res.green.phishing_grants == [clean]
    assert eng.state.hosts[clean].compromise == Compromise.USER


def test_blocked_access_fails():
    eng = Engine(make_config(probabilities={**QUIET, "green_local_work": 0.0}))
    for z1 in eng.state.zones:
        for z2 in eng.state.zones:
            if z1 < z2:
                eng.state.blocked.add(pair(z1, z2))
    res = eng.step(sleeps())
    cross = [a for a in res.green.accesses if a.verb == "AccessService" and a.blocked]
    assert cross and all(not a.ok for a in cross)
    assert res.green.block_denials == len(cross)
    assert res.reward.block_denials == len(cross)
    # block denials are not double counted as plain green failures
    assert res.reward.green_failures == res.green.failures - res.green.block_denials


def test_unavailable_host_fails_every_access():
    eng = Engine(make_config(probabilities={**QUIET, "green_local_work": 0.0}))
    target = "hq_public_access_host_0"
    eng.state.hosts[target].unavailable_until = 10_000
    hits = 0
    for _ in range(60):
        for a in eng.step(sleeps()).green.accesses:
            if a.host == target:
                hits += 1
                assert not a.ok
    assert hits > 0


def test_degraded_service_fails_access():
    eng = Engine(make_config(probabilities={**QUIET, "green_local_work": 0.0}))
    eng.state.hosts["hq_admin_host_0"].degraded = True
    res = [a for _ in range(40) for a in eng.step(sleeps()).green.accesses if a.host == "hq_admin_host_0"]
    assert res and not any(a.ok for a in res)


# -- blue actions ------------------------------------------------------------

_EXPECTED = {
    # (verb, compromise) -> (immediate status, compromise after completion)
    ("Remove", Compromise.CLEAN): (ActionStatus.TRUE, Compromise.CLEAN),
    ("Remove", Compromise.USER): (ActionStatus.TRUE, Compromise.CLEAN),
    ("Remove", Compromise.ADMIN): (ActionStatus.FALSE, Compromise.ADMIN),
    ("Restore", Compromise.CLEAN): (ActionStatus.IN_PROGRESS, Compromise.CLEAN),
    ("Restore", Compromise.USER): (ActionStatus.IN_PROGRESS, Compromise.CLEAN),
    ("Restore", Compromise.ADMIN): (ActionStatus.IN_PROGRESS, Compromise.CLEAN),
    ("Analyse", Compromise.CLEAN): (ActionStatus.IN_PROGRESS, Compromise.CLEAN),
    ("Analyse", Compromise.USER): (ActionStatus.IN_PROGRESS, Compromise.USER),
    ("Analyse", Compromise.ADMIN): (ActionStatus.IN_PROGRESS, Compromise.ADMIN),
    ("DeployDecoy", Compromise.CLEAN): (ActionStatus.IN_PROGRESS, Compromise.CLEAN),
    ("DeployDecoy", Compromise.USER): (ActionStatus.IN_PROGRESS, Compromise.USER),
    ("DeployDecoy", Compromise.ADMIN): (ActionStatus.IN_PROGRESS, Compromise.ADMIN),
    ("Monitor", Compromise.USER): (ActionStatus.TRUE, Compromise.USER),
    ("Sleep", Compromise.ADMIN): (ActionStatus.TRUE, Compromise.ADMIN),
}


@pytest.mark.parametrize("verb,level", list(_EXPECTED))
def test_blue_action_oracle(verb, level):
    eng = quiet_engine()
    hid = "deployed_b_restricted_host_1"
    eng.state.hosts[hid].compromise = level
    status, final = _EXPECTED[(verb, level)]
    res = eng.step(sleeps(**{blue_name(2): b(2, verb, hid)}))
    assert res.statuses[blue_name(2)] is status
    for _ in range(10):
        eng.step(sleeps())
    assert eng.state.hosts[hid].compromise == final


def test_duplicate_decoy_fails():
    eng = quiet_engine()
    hid = "hq_office_host_1"
    eng.step(sleeps(**{blue_name(4): b(4, "DeployDecoy", hid, "decoy_smtp")}))
    res = eng.step(sleeps())
    assert res.statuses[blue_name(4)] is ActionStatus.TRUE
    res = eng.step(sleeps(**{blue_name(4): b(4, "DeployDecoy", hid, "decoy_smtp")}))
    assert res.statuses[blue_name(4)] is ActionStatus.FALSE
    assert eng.state.hosts[hid].decoys == {"decoy_smtp"}


def test_decoy_catalogue_exhaustion():
    eng = quiet_engine()
    hid = "hq_office_host_1"
    statuses = []
    for _ in range(4):
        eng.step(sleeps(**{blue_name(4): b(4, "DeployDecoy", hid)}))
        statuses.append(eng.step(sleeps()).statuses[blue_name(4)])
    assert statuses[:3] == [ActionStatus.TRUE] * 3
    eng2 = eng.step(sleeps(**{blue_name(4): b(4, "DeployDecoy", hid)}))
    assert eng2.statuses[blue_name(4)] is ActionStatus.FALSE
    assert not (eng.state.hosts[hid].decoys & eng.state.hosts[hid].services)


def test_block_and_allow():
    eng = quiet_engine()
    res = eng.step(sleeps(**{blue_name(4): b(4, "BlockTrafficZone", ("hq_office", "contractor"))}))
    assert res.statuses[blue_name(4)] is ActionStatus.TRUE
    assert pair("hq_office", "contractor") in eng.policy().blocked_overrides
    eng.step(sleeps(**{blue_name(4): b(4, "AllowTrafficZone", ("hq_office", "contractor"))}))
    assert not eng.state.blocked


def test_block_needs_own_zone():
    eng = quiet_engine()
    res = eng.step(sleeps(**{blue_name(0): b(0, "BlockTrafficZone", ("hq_office", "contractor"))}))
    assert res.statuses[blue_name(0)] is ActionStatus.FALSE


# -- alerts ------------------------------------------------------------------

def test_decoy_exploit_alerts_with_certainty():
    eng = quiet_engine(detect_exploit=0.0)
    hid = "hq_public_access_host_1"
    eng.state.hosts[hid].decoys = {"decoy_apache"}
    eng.state.red_known.add(hid)
    res = eng.step(sleeps(**{RED_AGENT: r("Exploit", hid, "decoy_apache")}))
    assert res.statuses[RED_AGENT] is ActionStatus.FALSE
    assert [a.host for a in res.alerts] == [hid]
    assert res.alerts[0].observer == blue_name(4)
    assert "decoy" in res.alerts[0].description


def test_zero_scan_detection_is_silent():
    eng = quiet_engine(detect_scan=0.0)
    for zone in eng.state.zones:
        res = eng.step(sleeps(**{RED_AGENT: r("Discover", zone, "loud")}))
        assert res.alerts == []


def test_analyse_admin_yields_admin_alert():
    eng = quiet_engine()
    hid = "deployed_b_operational_host_0"
    eng.state.hosts[hid].compromise = Compromise.ADMIN
    eng.step(sleeps(**{blue_name(3): b(3, "Analyse", hid)}))
    res = eng.step(sleeps())
    admin = [a for a in res.alerts if a.severity is Severity.ADMIN]
    assert [(a.host, a.observer) for a in admin] == [(hid, blue_name(3))]
    assert res.observations[blue_name(3)].beliefs == {hid: Compromise.ADMIN}


def test_scan_detection_rates():
    n = 4000
    for mode, p_attr in (("loud", "detect_scan"), ("quiet", "detect_scan_quiet")):
        eng = Engine(make_config(steps=n, probabilities=QUIET))
        hits = sum(bool(eng.step(sleeps(**{RED_AGENT: r("Discover", "hq_office", mode)})).alerts) for _ in range(n))
        p = getattr(eng.config.probabilities, p_attr)
        assert abs(hits / n - p) < 4 * np.sqrt(p * (1 - p) / n)


# -- reward ------------------------------------------------------------------

def test_reward_examples():
    w = RewardWeights()
    assert reward(PenaltyEvents(), w).total == 0.0
    only_green = RewardWeights(green=1, impact=0, impact_critical=0, restore=0, block=0)
    assert reward(PenaltyEvents(green_failures=3), only_green).total == -3.0
    w5 = RewardWeights(impact=5, impact_critical=5)
    ev = PenaltyEvents(phase=MissionPhase.MISSION_A, impacts=1, critical_impacts=1)
    assert reward(ev, w5).total == -10.0


def test_negative_weight_rejected():
    with pytest.raises(ConfigError, match="rewards.block"):
        reward(PenaltyEvents(), RewardWeights(block=-1))
    with pytest.raises(ConfigError):
        make_config(rewards={"green": -0.5})


@given(st.integers(0, 50), st.integers(0, 5), st.integers(0, 5), st.integers(0, 20), st.integers(0, 20),
       st.sampled_from(list(MissionPhase)))
def test_reward_formula(g, imp, crit, down, blocks, phase):
    crit = min(crit, imp)
    w = RewardWeights()
    rec = reward(PenaltyEvents(0, phase, g, imp, crit, down, blocks), w)
    mult = w.phase_multipliers[phase.value]
    expected = -mult * (g + 5 * (imp - crit) + 10 * crit + down + blocks)
    assert rec.total == pytest.approx(expected)
    assert rec.total <= 0


# -- randomized invariants -----------------------------------------------------

def _random_actions(eng, rng):
    st_ = eng.state
    acts = {}
    for i in range(5):
        hosts = st_.hosts_of(i)
        verb = rng.choice(["Sleep", "Monitor", "Analyse", "Remove", "Restore", "DeployDecoy",
                           "BlockTrafficZone", "AllowTrafficZone"])
        if verb in ("BlockTrafficZone", "AllowTrafficZone"):
            acts[blue_name(i)] = b(i, verb, (st_.zones_of(i)[0], str(rng.choice(sorted(st_.zones)))))
        elif verb in ("Sleep", "Monitor"):
            acts[blue_name(i)] = b(i, verb)
        else:
            acts[blue_name(i)] = b(i, verb, str(rng.choice(hosts)))
    rverb = rng.choice(["Discover", "Exploit", "PrivilegeEscalate", "Impact", "DegradeService", "Withdraw", "Sleep"])
    if rverb == "Discover":
        acts[RED_AGENT] = r(rverb, str(rng.choice(sorted(st_.zones))), str(rng.choice(["loud", "quiet"])))
    elif rverb == "Sleep":
        acts[RED_AGENT] = r(rverb)
    else:
        acts[RED_AGENT] = r(rverb, str(rng.choice(sorted(st_.hosts))))
    return acts


def _drive(seed, steps=120, monitor_as_sleep=False):
    eng = Engine(make_config(seed=seed, steps=steps, probabilities={"p_phish": 0.05}))
    rng = np.random.default_rng(seed + 1000)
    hashes, records = [], []
    for _ in range(steps):
        acts = _random_actions(eng, rng)
        if monitor_as_sleep:
            acts = {a: (b(int(a[-1]), "Sleep") if x.verb == "Monitor" else x) for a, x in acts.items()}
        before = {h.id: h.compromise for h in eng.state.hosts.values()}
        res = eng.step(acts)
        records.append((before, {h.id: h.compromise for h in eng.state.hosts.values()}, acts, res))
        hashes.append(eng.state.state_hash())
    return hashes, records


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31))
def test_engine_invariants(seed):
    hashes, records = _drive(seed)
    cumulative = 0.0
    for t, (before, after, acts, res) in enumerate(records):
        assert res.reward.total <= 0
        assert cumulative + res.reward.total <= cumulative
        cumulative += res.reward.total
        for alert in res.alerts:
            host_zone = alert.host.rsplit("_host_", 1)[0]
            guardian = next(i for i in range(5) if host_zone in res.observations[blue_name(i)].zones)
            assert alert.observer == blue_name(guardian)
        red = acts[RED_AGENT]
        for hid, old in before.items():
            new = after[hid]
            if new == old:
                continue
            if new > old:
                # red-driven moves go up exactly one rung
                assert new == old + 1
                if old == Compromise.USER:
                    assert red.verb == "PrivilegeEscalate" and red.target == hid
                else:
                    assert (red.verb == "Exploit" and red.target == hid) or hid in res.green.phishing_grants
            else:
                assert new == Compromise.CLEAN
                removed = any(x.verb == "Remove" and x.target == hid for x in acts.values())
                window = records[max(0, t - 4):t + 1]  # default Restore duration is 5 steps
                restored = any(x.verb == "Restore" and x.target == hid for _, _, a, _ in window for x in a.values())
                assert (removed and old == Compromise.USER) or restored


def test_determinism_and_monitor_implicitness():
    h1, _ = _drive(7)
    h2, _ = _drive(7)
    h3, _ = _drive(7, monitor_as_sleep=True)
    assert h1 == h2 == h3
    h4, _ = _drive(8)
    assert h1 != h4
