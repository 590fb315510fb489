import numpy as np
import pytest

from pideeponet.deeponet import OperatorModel, sample_configuration_points
from pideeponet.nn import init_mlp
from pideeponet.rng import substream


def tiny_model(m=3, p=4, hidden=5, layers=1, seed=0, speed_mean=20.0, speed_std=3.0,
               length=600.0, duration=900.0, scheme="fan-in"):
    """Small operator model for gradient and round-trip checks."""
    theta = sample_configuration_points(m, seed)
    branch = init_mlp([m] + [hidden] * layers + [p], substream(seed, "t-branch"), scheme)
    trunk = init_mlp([2] + [hidden] * layers + [p], substream(seed, "t-trunk"), scheme)
    return OperatorModel(branch, trunk, theta, speed_mean, speed_std, length, duration)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}"
        if detail:
            line += f" ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
