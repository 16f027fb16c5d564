import os

import pytest
from hypothesis import HealthCheck, settings

from icqkd.adversary import EveKind, EveStrategy
from icqkd.config import SessionConfig

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def ideal():
    return SessionConfig(n_c=0.1, rounds=20_000, seed=42)


@pytest.fixture
def ir_config():
    return SessionConfig(n_c=0.1, rounds=20_000, seed=5, alpha_eta_intact=False,
                         eve=EveStrategy(EveKind.INTERCEPT_RESEND), error_check_fraction=0.5)


_verdicts: list[str] = []


@pytest.fixture
def verdict():
    """Record a one-line PASS/FAIL verdict, shown in the terminal summary."""
    def say(n, ok, text):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}"
        _verdicts.append(line)
        assert ok, line
    return say


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance criteria")
        for line in _verdicts:
            terminalreporter.write_line(line)
