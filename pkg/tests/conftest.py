import numpy as np
import pytest
from hypothesis import strategies as st

from ttmag import machine
from ttmag.dynamics import Kind


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(params=[Kind.SWAP, Kind.MIX], ids=["swap", "mix"])
def kind(request):
    return request.param


@pytest.fixture
def fig2():
    return machine.fig2_config


def random_density_matrix(rng, dim=4):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


positive = st.floats(min_value=0.05, max_value=5.0, allow_nan=False, allow_infinity=False)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
