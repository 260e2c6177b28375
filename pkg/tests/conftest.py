import numpy as np
import pytest

from sublap import _backend


@pytest.fixture(params=sorted(_backend.BACKENDS))
def backend(request, monkeypatch):
    """Run a test once per available Laguerre kernel backend."""
    monkeypatch.setattr(_backend, "kernels", _backend.BACKENDS[request.param])
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def two_form(i, j, n=4):
    """e_i ^ e_j as a skew matrix (1-based indices)."""
    m = np.zeros((n, n))
    m[i - 1, j - 1], m[j - 1, i - 1] = 1.0, -1.0
    return m


ACCEPTANCE = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
