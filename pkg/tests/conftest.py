import numpy as np
import pytest

from spde_reaction.spectral import GridSpec, ModelParams

_ACCEPTANCE_LINES: list[str] = []


def record_criterion(cid: str, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {cid}: {title} :: {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def paper_params():
    return ModelParams(theta0=0.0, sigma=1.0, nu=0.1, kappa=1.0, eta=1.0, alpha=0.5)


@pytest.fixture
def small_grid():
    return GridSpec(16, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
