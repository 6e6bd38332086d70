import time
from contextlib import contextmanager
from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parent / "fixtures"

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


class _Outcome:
    detail = ""


@pytest.fixture
def criterion(request):
    """Context manager recording one acceptance criterion's outcome and runtime."""
    rows = request.config.stash[_ACCEPTANCE]

    @contextmanager
    def record(number: int, title: str, limit: float | None = None):
        out = _Outcome()
        start = time.perf_counter()
        try:
            yield out
        except BaseException as exc:
            took = time.perf_counter() - start
            reason = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
            rows.append((number, "FAIL", title, f"{out.detail} [{took:.2f}s] {reason}".strip()))
            raise
        took = time.perf_counter() - start
        if limit is not None and took >= limit:
            rows.append((number, "FAIL", title, f"{out.detail} [{took:.2f}s >= {limit:g}s limit]"))
            raise AssertionError(f"criterion {number} took {took:.2f}s (limit {limit:g}s)")
        rows.append((number, "PASS", title, f"{out.detail} [{took:.2f}s]".strip()))

    return record


def pytest_terminal_summary(terminalreporter, config):
    rows = sorted(config.stash.get(_ACCEPTANCE, []))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, detail in rows:
        terminalreporter.write_line(f"criterion {number:>2} {status}  {title}: {detail}")
