import numpy as np
import pytest
from hypothesis import settings

from mirrorbias.shallow_net import Dataset

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def fig1():
    return Dataset(np.array([-1.0, -0.2, 0.0, 0.2, 1.0]),
                   np.array([-0.15, -0.15, 0.15, -0.15, -0.15]))


@pytest.fixture
def fig2():
    return Dataset(np.array([-1.0, 0.35, 0.65, 1.0]), np.array([0.15, 0.15, -0.15, 0.15]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
