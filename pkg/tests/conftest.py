import numpy as np
import pytest

from onlinepd import ObjectiveSpec


def random_power_sum(rng, n=4, K=3, exponents=(1.0, 2.0, 3.0), density=0.7):
    B = np.where(rng.random((K, n)) < density, rng.uniform(0.1, 3.0, (K, n)), 0.0)
    B[rng.integers(0, K, n), np.arange(n)] = rng.uniform(0.1, 3.0, n)
    p = rng.choice(exponents, size=K)
    s = rng.uniform(0.2, 2.0, K)
    return ObjectiveSpec.from_forms(B, p, s)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
