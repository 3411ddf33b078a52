import pytest

VERDICTS: dict[str, tuple[bool, str]] = {}


def _order(label: str):
    number, _, rest = label.partition("/")
    return int(number), rest


@pytest.fixture
def verdict():
    """Record one acceptance verdict, then fail the test if it did not pass."""

    def record(label, ok: bool, detail: str):
        label = str(label)
        VERDICTS[label] = (bool(ok), detail)
        print(f"criterion {label:>7}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(VERDICTS, key=_order):
        ok, detail = VERDICTS[label]
        terminalreporter.write_line(f"criterion {label:>7}: {'PASS' if ok else 'FAIL'}  {detail}")
