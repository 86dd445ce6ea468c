import numpy as np
import pytest

from mbmf.oracle import CubicModel
from mbmf.scaling import make_q_grid
from mbmf.spectrum import exponents

_criteria: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "passed": True, "n": 0})
    entry["n"] += 1
    entry["passed"] &= rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        status = "PASS" if e["passed"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {e['title']} ({e['n']} checks)")


@pytest.fixture(scope="session")
def cubic():
    return CubicModel(a=1.0, c=4.0)


@pytest.fixture(scope="session")
def oracle_exponents(cubic):
    q = make_q_grid(-10, 10, 0.01)
    return exponents(q=q, h=cubic.h(q))


def rel_close(x, ref, tol):
    """``|x - ref| <= tol * max(1, |ref|)`` elementwise."""
    x, ref = np.asarray(x, float), np.asarray(ref, float)
    return np.abs(x - ref) <= tol * np.maximum(1.0, np.abs(ref))
