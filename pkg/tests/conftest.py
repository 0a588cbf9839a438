import numpy as np
import pytest

from penfpca.grid_penalty import build_grid, build_penalty


def random_grid(rng, m, equispaced=False):
    if equispaced:
        return build_grid(np.linspace(0.0, rng.uniform(1, 10), m))
    gaps = rng.uniform(0.1, 2.0, size=m - 1)
    t0 = rng.normal()
    return build_grid(t0 + np.concatenate([[0.0], np.cumsum(gaps)]))


@pytest.fixture
def rng():
    return np.random.default_rng(20081)


@pytest.fixture
def unit3():
    return build_penalty(build_grid([0.0, 1.0, 2.0]))


@pytest.fixture
def pen8():
    return build_penalty(build_grid(np.linspace(0.0, 7.0, 8)))


@pytest.fixture
def pen20(rng):
    return build_penalty(random_grid(rng, 20))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
