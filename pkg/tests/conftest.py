import pytest

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion, then assert."""

    def record(label: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((label, bool(passed), detail))
        assert passed, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(_ACCEPTANCE, key=lambda r: int(r[0].split()[0])):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {label} {detail}")
