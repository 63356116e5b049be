import pytest

_LINES: list[str] = []


@pytest.fixture
def acceptance(capsys):
    """Record one PASS/FAIL line for an acceptance criterion and print it live."""

    def report(num: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {title}" + (f" ({detail})" if detail else "")
        _LINES.append(line)
        with capsys.disabled():
            print("\n" + line, flush=True)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
