"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

import time
from contextlib import contextmanager

LINES: dict[int, str] = {}


@contextmanager
def criterion(number: int, title: str, budget_s: float):
    """Time the block, fail it if it exceeds ``budget_s``, and log the outcome."""
    start = time.perf_counter()
    note = {}
    try:
        yield note
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        detail = note.get("detail") or f"{type(exc).__name__}: {exc}".splitlines()[0]
        _log(number, "FAIL", title, elapsed, budget_s, detail)
        raise
    elapsed = time.perf_counter() - start
    note["elapsed"] = elapsed
    if elapsed >= budget_s:
        _log(number, "FAIL", title, elapsed, budget_s, "over the runtime budget")
        raise AssertionError(f"criterion {number} took {elapsed:.2f}s, budget {budget_s:.2f}s")
    _log(number, "PASS", title, elapsed, budget_s, note.get("detail", ""))


def _log(number, status, title, elapsed, budget, detail):
    line = f"[{status}] criterion {number:>2}: {title} ({elapsed:.2f}s / budget {budget:.2f}s)"
    if detail:
        line += f" - {detail}"
    LINES[number] = line
    print(line)
