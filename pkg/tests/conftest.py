import numpy as np
import pytest

from riskbandit.env import Bernoulli, DiscreteFinite, Gaussian, TruncatedGaussian, Uniform


@pytest.fixture
def rng():
    return np.random.default_rng(20251221)


ALL_DISTRIBUTIONS = [
    Gaussian(1.5, 2.0),
    TruncatedGaussian(0.5, 1.5, 2.0),
    TruncatedGaussian(0.0, 1.0, 0.5),
    Bernoulli(0.3, -1.0, 2.0),
    Uniform(-2.0, 5.0),
    DiscreteFinite((-1.0, 0.0, 4.0), (0.2, 0.5, 0.3)),
]


_acceptance_lines: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
