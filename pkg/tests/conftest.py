import pytest

_RESULTS: list[tuple[str, str, str]] = []


@pytest.fixture
def criterion():
    """record(cid, ok, detail) stores one PASS/FAIL line; info(cid, detail) a side note."""

    class Recorder:
        def __call__(self, cid: str, ok: bool, detail: str) -> bool:
            _RESULTS.append(("PASS" if ok else "FAIL", cid, detail))
            return bool(ok)

        def info(self, cid: str, detail: str) -> None:
            _RESULTS.append(("INFO", cid, detail))

    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for status, cid, detail in _RESULTS:
        terminalreporter.write_line(f"{status} {cid:<6} {detail}")
    n_fail = sum(1 for s, *_ in _RESULTS if s == "FAIL")
    n_pass = sum(1 for s, *_ in _RESULTS if s == "PASS")
    terminalreporter.write_line(f"{n_pass} criteria passed, {n_fail} failed")
