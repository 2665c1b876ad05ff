import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def speckled():
    """A small piecewise-constant image with M=8 speckle: (clean, noisy)."""
    from despeckle.noise import GammaNoise, apply_multiplicative_noise

    clean = np.full((32, 32), 60.0)
    clean[8:24, 8:24] = 180.0
    clean[:, 28:] = 110.0
    return clean, apply_multiplicative_noise(clean, GammaNoise(8, seed=3))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not getattr(module, "RESULTS", None) and not getattr(module, "RAN", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(module.RAN):
        ok, detail = module.RESULTS.get(n, (False, "did not complete"))
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
