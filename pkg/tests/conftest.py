import numpy as np
import pytest

_CRITERIA = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    num = dict(report.user_properties).get("criterion")
    if num is not None:
        _CRITERIA.append((num, report.nodeid.split("::")[-1], report.outcome))


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    m = item.get_closest_marker("criterion")
    if m is not None:
        item.user_properties.append(("criterion", m.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, outcome in sorted(_CRITERIA, key=lambda r: (int(r[0]), r[1])):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:>3}: {status}  {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
