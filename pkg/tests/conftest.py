import numpy as np
import pytest

from tangentllg.mesh import build_box_mesh


@pytest.fixture(scope="session")
def unit_cube():
    return build_box_mesh(1, 1, 1)


@pytest.fixture(scope="session")
def cube4():
    return build_box_mesh(4, 4, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unit(rng, n):
    m = rng.normal(size=(n, 3))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""

    def _report(k: int, name: str, ok: bool, detail: str = ""):
        line = f"criterion {k:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES[k] = line
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
