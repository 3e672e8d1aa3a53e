import sys

import pytest

from acd_arena.config import parse_config


def make_config(**overrides):
    return parse_config(overrides)


@pytest.fixture
def config():
    return make_config()


@pytest.fixture
def quiet_config():
    """No stochastic noise: no phishing, no false positives, certain detection."""
    return make_config(probabilities={
        "p_phish": 0.0, "fp_green": 0.0, "detect_scan": 1.0, "detect_exploit": 1.0,
        "detect_scan_quiet": 1.0, "green_local_work": 1.0,
    })


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
