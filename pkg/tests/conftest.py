import numpy as np
import pytest

from spinqst import ChainSpec, Model

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_spec(rng: np.random.Generator, model: Model, n: int, centro: bool = False) -> ChainSpec:
    if model is Model.SHORT_RANGE:
        v = rng.uniform(0.1, 3.0, n - 1)
    else:
        v = rng.uniform(0.3, 2.0, n - 1)
    if centro:
        v = 0.5 * (v + v[::-1])
    if model is Model.SHORT_RANGE:
        return ChainSpec(model, n, couplings=v, centro_symmetric=centro)
    return ChainSpec(model, n, gaps=v, global_j=rng.uniform(0.5, 2.0), centro_symmetric=centro)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
