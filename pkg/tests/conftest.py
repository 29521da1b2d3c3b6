from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from sdeot.config import load_config
from sdeot.measures import DiscreteMeasure, SourceMeasure

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"
SHIPPED = sorted(p.stem for p in CONFIG_DIR.glob("*.toml"))
SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


def shipped(name):
    return load_config(CONFIG_DIR / f"{name}.toml")


@pytest.fixture(scope="session")
def unif1():
    return SourceMeasure.uniform((-1.0, 1.0))


@pytest.fixture(scope="session")
def square():
    return SourceMeasure.uniform(SQUARE)


@pytest.fixture(scope="session")
def sym_target():
    return DiscreteMeasure([[-1.0], [1.0]], [0.5, 0.5])


@pytest.fixture(scope="session")
def asym_target():
    return DiscreteMeasure([[-1.0], [1.0]], [1 / 3, 2 / 3])


@pytest.fixture(scope="session")
def split_target():
    return DiscreteMeasure([[0.25, 0.5], [0.75, 0.5]], [0.5, 0.5])


@pytest.fixture(scope="session")
def four_target():
    return DiscreteMeasure([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]], [0.25] * 4)


@pytest.fixture(scope="session", params=SHIPPED)
def shipped_config(request):
    return shipped(request.param)
