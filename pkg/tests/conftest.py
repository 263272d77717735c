import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def halton_stencil(n: int, skip: int = 1) -> np.ndarray:
    """``n`` Halton points mapped to [-1, 1]^2."""
    from limqr.geometry import halton_points
    return 2.0 * halton_points(n, skip=skip) - 1.0


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
