import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the test body sets ``rec['detail']``."""
    rec = {"name": None, "detail": "", "ok": False}
    yield rec
    status = "PASS" if rec["ok"] else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] {rec['name']}: {rec['detail']}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
