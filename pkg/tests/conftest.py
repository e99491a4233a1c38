import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> list of (test id, passed, detail)
_CRITERIA: dict[int, list] = {}
_DETAILS: dict[str, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion covered by the test")


@pytest.fixture
def note(request):
    """Attach a short measurement to the acceptance summary line of this test."""

    def add(text: str) -> None:
        _DETAILS.setdefault(request.node.nodeid, []).append(text)
        print(text)

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    _CRITERIA.setdefault(int(marker.args[0]), []).append((item.nodeid, rep.passed, _DETAILS.get(item.nodeid, [])))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for n in sorted(_CRITERIA):
        results = _CRITERIA[n]
        ok = all(p for _, p, _ in results)
        details = "; ".join(d for _, _, ds in results for d in ds)
        tr.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({len(results)} checks) {details}")
