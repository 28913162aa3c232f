import numpy as np
import pytest

from emsnn.kernels import _jit, _np

BACKENDS = [pytest.param(_jit, id="numba"), pytest.param(_np, id="numpy")]

# 1-D worked example: neighbors by hand are 0:[1,2] 1:[0,2] 2:[1,0] 3:[2,1]
FOUR_POINTS = np.array([[0.0], [1.0], [2.5], [6.0]])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def four_points():
    return FOUR_POINTS.copy()


_criterion_lines = []


def record_criterion(line):
    _criterion_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)
