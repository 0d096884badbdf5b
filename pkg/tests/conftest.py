import pytest

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture(scope="session")
def criterion_log():
    """Record one verdict per acceptance criterion; printed after the run."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> None:
        _CRITERIA[number] = (title, bool(ok), detail)
        print(f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}  ({detail})")
