import numpy as np
import pytest

from graphroot.models import SBMSpec

# parameters of the worked block-model examples
PI = np.array([0.3, 0.3, 0.4])
B_EXAMPLE = np.full((3, 3), 0.5) - 0.25 * np.eye(3)
B_SIM = np.array([[1 / 4, 1 / 2, 1 / 4], [1 / 2, 1 / 4, 1 / 4], [1 / 4, 1 / 4, 1 / 6]])
# two-decimal atoms of the worked block-model example
ROUNDED_ATOMS = np.array([[0.65, 0.41, 0.0], [0.65, -0.20, -0.35], [0.65, -0.20, 0.35]])

_acceptance_lines: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    _acceptance_lines.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")


@pytest.fixture
def example_sbm():
    return SBMSpec(PI, B_EXAMPLE)


@pytest.fixture
def sim_sbm():
    return SBMSpec(PI, B_SIM)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
