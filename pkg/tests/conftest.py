import numpy as np
import pytest

from mention_lab.synth import build_fixture_store

# criterion number -> list of (test id, passed, note)
_ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture(scope="session")
def synth_store(tmp_path_factory):
    """The bundled three-project synthetic store, built once per session."""
    root = tmp_path_factory.mktemp("synth")
    projects = build_fixture_store(root / "store", root / "fixtures")
    return root / "store", projects, root / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        passed = report.passed and not hasattr(report, "wasxfail")
        note = "expected failure: " + report.wasxfail if hasattr(report, "wasxfail") else ""
        _ACCEPTANCE.setdefault(int(marker.args[0]), []).append((item.name, passed, note))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        results = _ACCEPTANCE[n]
        ok = all(p for _, p, _ in results)
        failed = [f"{name} ({note})" if note else name for name, p, note in results if not p]
        detail = "; ".join(failed) if failed else f"{len(results)} check(s)"
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
