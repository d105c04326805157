import numpy as np
import pytest

from aepca.experiments import PLANTED_STDS, planted_dataset

ACCEPTANCE_LINES: list[str] = []


def make_planted(seed=0, count=2000, mean_norm=0.0, stds=PLANTED_STDS):
    return planted_dataset(seed, count, mean_norm, stds)


@pytest.fixture(scope="session")
def planted():
    return make_planted()


@pytest.fixture
def axis_data():
    return np.array([[2.0, -2.0, 0.0, 0.0], [0.0, 0.0, 1.0, -1.0]])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
