import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from anomtypes.injector import build_benchmark, default_injection, generate_base, two_cluster_base  # noqa: E402

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): one of the numbered acceptance criteria")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    key = f"{number:02d}"
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        prev = _ACCEPTANCE.get(key, (title, "PASS"))[1]
        status = "PASS" if report.passed and prev == "PASS" else "FAIL"
        if report.skipped:
            status = "SKIP"
        _ACCEPTANCE[key] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        title, status = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {int(key):2d} {status}: {title}")


@pytest.fixture(scope="session")
def base_spec():
    return two_cluster_base()


@pytest.fixture(scope="session")
def base(base_spec):
    return generate_base(base_spec)


@pytest.fixture(scope="session")
def injection_spec():
    return default_injection()


@pytest.fixture(scope="session")
def benchmark(base_spec, injection_spec):
    return build_benchmark(base_spec, injection_spec)
