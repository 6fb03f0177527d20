import pytest

_ACCEPTANCE: dict[int, str] = {}


class AcceptanceLog:
    def record(self, number: int, name: str, ok: bool, detail: str) -> None:
        line = f"criterion {number} [{name}]: {'PASS' if ok else 'FAIL'} ({detail})"
        _ACCEPTANCE[number] = line
        print(line)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
