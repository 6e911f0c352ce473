import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from amput import MarketModel  # noqa: E402
from amput.pde import solve_vi  # noqa: E402

ACCEPTANCE_LINES = []


def canonical(d: float) -> MarketModel:
    return MarketModel(r=0.05, d=d, sigma=0.2, S0=100.0, K=100.0, T=1.0)


@pytest.fixture(scope="session")
def atm():
    return canonical(0.0)


@pytest.fixture(scope="session")
def model_low():
    return canonical(0.03)


@pytest.fixture(scope="session")
def model_high():
    return canonical(0.08)


@pytest.fixture(scope="session")
def small_solution(model_low):
    return solve_vi(model_low, 400, 400)


@pytest.fixture(scope="session")
def model_file(tmp_path_factory, model_low):
    path = tmp_path_factory.mktemp("models") / "model.json"
    path.write_text(json.dumps(model_low.to_dict()))
    return path


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
