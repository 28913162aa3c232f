import os
import subprocess
import sys

import pytest

PROBE = "import emsnn.kernels as k; print(k.BACKEND)"


@pytest.mark.parametrize("value, expected", [("numpy", "numpy"), ("numba", "numba"), (None, "numba")])
def test_env_flag_selects_backend(value, expected):
    env = {k: v for k, v in os.environ.items() if k != "EMSNN_BACKEND"}
    if value:
        env["EMSNN_BACKEND"] = value
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
