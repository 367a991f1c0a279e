import os

import pytest
from hypothesis import HealthCheck, settings

from tredkit import _backend

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.register_profile("stress", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=3000)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(params=_backend.available())
def backend(request):
    """Run the test once per available kernel backend."""
    with _backend.use(request.param):
        yield request.param


ACCEPTANCE = {}


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion."""
    def _report(criterion, ok, detail):
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"criterion {criterion:>2}: {status}  {detail}"
        ACCEPTANCE[criterion] = line
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
