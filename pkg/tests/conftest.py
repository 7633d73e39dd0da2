import numpy as np
import pytest

from nrpos.config import config_from_dict, default_config_dict, load_config, merge
from nrpos.model import GnbDeployment, Position2D


@pytest.fixture(scope="session")
def default_config():
    return load_config()


@pytest.fixture
def scenario():
    """Build a scenario from the shipped default plus nested overrides."""

    def build(**overrides):
        return config_from_dict(merge(default_config_dict(), overrides))

    return build


@pytest.fixture(scope="session")
def triangle():
    return GnbDeployment((Position2D(0, 0), Position2D(50, 0), Position2D(25, 43.30127)))


def random_in_hull(rng, dep, n):
    """Uniform points inside a triangular deployment."""
    a, b, c = (p.as_array() for p in dep.positions[:3])
    u, v = rng.random(n), rng.random(n)
    flip = u + v > 1
    u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
    return a + np.outer(u, b - a) + np.outer(v, c - a)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
