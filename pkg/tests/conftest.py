from contextlib import contextmanager

import pytest

_LINES = pytest.StashKey[dict]()


class _Outcome:
    def __init__(self):
        self.passed = False
        self.detail = ""


@pytest.fixture
def criterion(request, capsys):
    """Record one pass/fail line per acceptance criterion and echo it immediately."""
    lines = request.config.stash.setdefault(_LINES, {})

    @contextmanager
    def record(number: int, title: str):
        out = _Outcome()
        try:
            yield out
        except Exception as exc:
            out.passed = False
            out.detail = f"error: {type(exc).__name__}: {exc}"
            raise
        finally:
            line = f"criterion {number} {'PASS' if out.passed else 'FAIL'} | {title} | {out.detail}"
            lines[number] = line
            with capsys.disabled():
                print("\n" + line, flush=True)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
