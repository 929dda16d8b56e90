import numpy as np
import pytest

from clusbird import Dataset, ModelParams, project

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        _CRITERIA[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}")


# -- shared builders ------------------------------------------------------------------------


def random_params(rng, k, l, d, scale=1.0):  # noqa: E741
    xi = rng.dirichlet(np.full(k, 3.0))
    return ModelParams(
        xi=xi,
        mu=rng.normal(0, scale, d),
        f=project(rng.standard_normal((k, l))),
        a=rng.normal(0, scale, (d, l)),
    )


def random_data(rng, n, d, p=0.5):
    return Dataset((rng.random((n, d)) < p).astype(np.int8))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
