import numpy as np
import pytest

from darwinlab.states import ginibre_dm, haar_ket, rng_for

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number and summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, text = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        # several tests may share a criterion; any failure sticks
        if _criteria.get(n, ("PASS",))[0] != "FAIL":
            _criteria[n] = ("PASS" if rep.passed else "FAIL", text)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        status, text = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {text}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_density(dim, seed, rank=None):
    g = rng_for(seed, "tests/density")
    return ginibre_dm(dim, dim if rank is None else rank, g)


def random_ket(dim, seed):
    return haar_ket(dim, rng_for(seed, "tests/ket"))
