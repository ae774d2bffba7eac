import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cflexplain.instance import GenerationConfig, Instance, generate, precompute

# the first call of each compiled kernel takes seconds; keep it out of deadlines
settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def make_instance(customers, candidates, competitors, weights=None, x0=None, slope=-0.1):
    customers = np.asarray(customers, dtype=float)
    candidates = np.asarray(candidates, dtype=float)
    return Instance(
        customer_xy=customers,
        weights=np.ones(len(customers)) if weights is None else np.asarray(weights, dtype=float),
        candidate_xy=candidates,
        x0=np.zeros(len(candidates)) if x0 is None else np.asarray(x0, dtype=float),
        competitor_xy=np.asarray(competitors, dtype=float),
        slope=slope,
    )


@pytest.fixture(scope="session")
def regression_instance():
    """Four customers, three candidates, two competitors; shared by several modules."""
    inst = generate(GenerationConfig(4, 3, 2, seed=7))
    return inst, precompute(inst)


@pytest.fixture(scope="session")
def medium_instance():
    inst = generate(GenerationConfig(30, 8, 5, seed=11))
    return inst, precompute(inst)


# -- acceptance reporting: one PASS/FAIL line per criterion at the end of the run

_ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (report.when != "call" and report.passed):
        return
    number, title = mark.args
    ok = report.passed and _ACCEPTANCE.get(number, (title, True))[1]
    _ACCEPTANCE[number] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
