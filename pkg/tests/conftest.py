import os

import hypothesis
import numpy as np
import pytest

from offrl.mdp import TabularMDP, random_mdp, random_policy

hypothesis.settings.register_profile("ci", max_examples=40, deadline=None)
hypothesis.settings.register_profile("dev", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture
def loop_mdp():
    """One state, rewards (1, 0), gamma 0.9."""
    return TabularMDP(np.ones((1, 2, 1)), np.array([[1.0, 0.0]]), 0.9, np.ones(1))


@pytest.fixture
def small_mdp():
    return random_mdp(3, 2, 0.9, np.random.default_rng(7))


@pytest.fixture
def small_policy():
    return random_policy(3, 2, np.random.default_rng(8))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: one test per acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
