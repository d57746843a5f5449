import pytest

VERDICTS = {}


@pytest.fixture
def verdict():
    """Record one acceptance line, then assert it."""
    def record(key, name, ok, detail=""):
        VERDICTS[key] = (name, bool(ok), detail)
        assert ok, f"{name}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(VERDICTS, key=lambda k: (int(k.rstrip("abcdefgh")), k)):
        name, ok, detail = VERDICTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}. {name}: {detail}")
