import pytest

from hartogs_szego.precision import PrecCtx
from hartogs_szego.weights import WeightParams


@pytest.fixture(scope="session")
def ctx():
    """Default working precision (256 bits, 1e-30)."""
    return PrecCtx()


@pytest.fixture(scope="session")
def fast_ctx():
    """Cheaper precision for tests that only need ~1e-20."""
    return PrecCtx(128, 1e-24)


@pytest.fixture(scope="session")
def flat():
    return WeightParams(0, 1, 1)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
