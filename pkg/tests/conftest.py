import time

import pytest

# "NN label" -> (passed, detail); filled by tests in test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}

_STUDIES = {}


@pytest.fixture
def record():
    def _record(key, passed, detail=""):
        ACCEPTANCE[key] = (bool(passed), detail)
        return passed
    return _record


@pytest.fixture(scope="session")
def preset_study():
    """Full-resolution convergence study per preset, cache disabled, run once."""
    from ibcsplit.bench.config import preset_spec
    from ibcsplit.bench.study import run_convergence_study

    def get(pid):
        if pid not in _STUDIES:
            t0 = time.perf_counter()
            report = run_convergence_study(preset_spec(pid))
            _STUDIES[pid] = (report, time.perf_counter() - t0)
        return _STUDIES[pid]
    return get


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    # a criterion that crashed before recording still gets a FAIL line
    if rep.when == "call" and rep.failed and item.module.__name__.endswith("test_acceptance"):
        before = getattr(item, "_acceptance_keys", None)
        if before is not None and set(ACCEPTANCE) == before:
            ACCEPTANCE[f"?? {item.name}"] = (False, f"raised {call.excinfo.typename}: {call.excinfo.value}")


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_call(item):
    item._acceptance_keys = set(ACCEPTANCE)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {key}  {detail}")
