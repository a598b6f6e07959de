import pytest

_VERDICTS: dict[int, list] = {}


class Verdict:
    """Collects the sub-checks of one acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.failures: list[str] = []
        self.notes: list[str] = []

    def check(self, ok, what: str) -> bool:
        if not ok:
            self.failures.append(what)
        return bool(ok)

    def note(self, text: str) -> None:
        self.notes.append(text)

    def line(self) -> str:
        status = "PASS" if not self.failures else "FAIL"
        text = f"criterion {self.number:>2} {status}: {self.title}"
        if self.failures:
            text += " | failed: " + "; ".join(self.failures)
        if self.notes:
            text += " | " + "; ".join(self.notes)
        return text


@pytest.fixture(scope="session")
def criterion():
    """Verdict for a criterion number; tests covering parts of one criterion share it."""

    def get(number: int, title: str) -> Verdict:
        if number not in _VERDICTS:
            _VERDICTS[number] = Verdict(number, title)
        return _VERDICTS[number]

    return get


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[n].line())
