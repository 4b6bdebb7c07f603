import numpy as np
import pytest

from reactcoef import catalog
from reactcoef.forward import ForwardProblem
from reactcoef.mesh import build_square_mesh


@pytest.fixture(scope="session")
def mesh4():
    return build_square_mesh(4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def example1_problem(mesh4):
    return ForwardProblem(mesh4, catalog.coefficients(), ("bottom",))


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    def record(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append((n, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
