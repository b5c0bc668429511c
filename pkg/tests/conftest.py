import pytest
from hypothesis import HealthCheck, settings

from shimmy.dynamics import NlgParams
from shimmy.tire import TireKind, TireModel

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return NlgParams()


@pytest.fixture(scope="session")
def piecewise(params):
    return TireModel.from_params(TireKind.PIECEWISE, params)


@pytest.fixture(scope="session")
def smooth(params):
    return TireModel.from_params(TireKind.SMOOTH, params)


ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""
    def report(number, ok, detail):
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
