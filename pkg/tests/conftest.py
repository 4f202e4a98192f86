import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bfr.posterior import SurvivalData  # noqa: E402


@pytest.fixture
def single_obs():
    """One complete time at 2 with tau = 4."""
    return SurvivalData([2.0], [1], 4.0)


@pytest.fixture
def small_data():
    """Nine records, eight complete, spread over (0, 4)."""
    times = [0.21, 0.47, 0.83, 1.38, 2.12, 2.71, 3.15, 3.62, 4.0]
    return SurvivalData(times, [1] * 8 + [0], 4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Context-manager factory that times a criterion and logs PASS/FAIL."""
    import contextlib
    import time

    @contextlib.contextmanager
    def run(number: int, title: str, budget_s: float):
        notes: list[str] = []
        t0 = time.perf_counter()
        status = "FAIL"
        try:
            yield notes.append
            elapsed = time.perf_counter() - t0
            if elapsed >= budget_s:
                notes.append(f"over time budget of {budget_s:g}s")
                raise AssertionError(f"criterion {number} took {elapsed:.1f}s, budget {budget_s:g}s")
            status = "PASS"
        finally:
            elapsed = time.perf_counter() - t0
            detail = "; ".join(notes)
            line = f"[{number:02d}] {status} {title} ({elapsed:.1f}s){': ' + detail if detail else ''}"
            ACCEPTANCE_LINES.append(line)
            print(line)

    return run


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
