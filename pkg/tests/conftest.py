import numpy as np
import pytest

from blinkfim.quadrature import QuadratureSpec

_ACCEPTANCE = {}


@pytest.fixture
def quad():
    return QuadratureSpec()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(n, ok, detail)."""
    def record(n, ok, detail):
        line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}: {detail}"
        _ACCEPTANCE[n] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
