"""PASS/FAIL registry for the acceptance suite."""

from __future__ import annotations

import functools
import time

RESULTS: dict[int, str] = {}


def criterion(number: int, title: str, limit: float):
    """Time the wrapped check, enforce ``limit`` seconds and record one line.

    A check may return ``(detail, seconds)`` to report its own timed section.
    """

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs)
            except BaseException as exc:
                elapsed = time.perf_counter() - t0
                RESULTS[number] = f"FAIL criterion {number} [{title}] {elapsed:.1f}s: {type(exc).__name__}: {exc}"
                print(RESULTS[number])
                raise
            elapsed = time.perf_counter() - t0
            if isinstance(detail, tuple):
                # the check timed its own evaluation, excluding oracle setup
                detail, elapsed = detail
            ok = elapsed < limit
            status = "PASS" if ok else "FAIL"
            RESULTS[number] = f"{status} criterion {number} [{title}] {elapsed:.1f}s (limit {limit:g}s)" + (
                f": {detail}" if detail else ""
            )
            print(RESULTS[number])
            assert ok, f"runtime {elapsed:.1f}s exceeds {limit}s"

        return run

    return wrap
