import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from cascade_hum import CascadeCoefficients, Grid1D, PiecewiseField, SubdomainMask, build_tree  # noqa: E402

settings.register_profile("lab", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture
def grid():
    return Grid1D(31)


@pytest.fixture
def tree():
    return build_tree(10, 1.0)


@pytest.fixture
def masks(grid):
    return {
        "G0": SubdomainMask(grid, 0.3, 0.8, "G0"),
        "G0_tilde": SubdomainMask(grid, 0.35, 0.75, "G0_tilde"),
        "G1": SubdomainMask(grid, 0.45, 0.65, "G1"),
    }


@pytest.fixture
def coupled():
    return CascadeCoefficients(2, a={(1, 0): PiecewiseField(1.0, 0.35, 0.75)})


@pytest.fixture
def decoupled():
    return CascadeCoefficients(2)


@pytest.fixture
def rich():
    """Coupled two-component system with every coefficient kind present, including noise."""
    return CascadeCoefficients(
        2,
        a={(0, 0): 0.5, (0, 1): 0.3, (1, 0): PiecewiseField(1.0, 0.35, 0.75), (1, 1): -0.2},
        b={(0, 0): 0.4, (0, 1): 0.2, (1, 1): 0.3},
        c={(0, 1): 0.2, (1, 1): 0.1},
        beta=[PiecewiseField(1.0, 0.0, 1.0, 0.0, 0.5), 0.7],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
