import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion id -> list of (test name, passed, detail)
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(id): test belongs to an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _CRITERIA.setdefault(mark.args[0], []).append((item.name, rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: int(k[1:])):
        results = _CRITERIA[key]
        ok = all(p for _, p, _ in results)
        failed = [name for name, p, _ in results if not p]
        details = " | ".join(d for _, _, d in results if d)
        line = f"{key}: {'PASS' if ok else 'FAIL'}"
        if failed:
            line += f" (failed: {', '.join(failed)})"
        if details:
            line += f"  {details}"
        terminalreporter.write_line(line)
