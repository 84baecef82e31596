import numpy as np
import pytest

from nmflow.channels import AmplitudeDamping, GeneralizedAmplitudeDamping


def time_grid(t_max, dt=0.01):
    return dt * np.arange(int(round(t_max / dt)) + 1)


# the three documented scenarios: (label, family, grid in model time)
SCENARIOS = {
    "ad_markov": (AmplitudeDamping(1.0, 3.0), time_grid(10.0)),
    "ad_nonmarkov": (AmplitudeDamping(1.0, 0.1), time_grid(50.0)),
    "gad": (GeneralizedAmplitudeDamping(5.0), time_grid(3.0)),
}


# filled by the acceptance suite, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_hermitian(d, rng):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (a + a.conj().T)
