"""Shared fixtures: one cached benchmark-suite run and the acceptance
criteria result table printed at the end of the session."""

import time

import numpy as np
import pytest

from polarbench.pipeline import RunConfig, run_scene, suite_descriptors
from polarbench.scenes import generate_scene

# (criterion number, line) tuples filled in by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def record_acceptance(num: int, name: str, ok: bool, detail: str = ""):
    line = f"[acceptance {num:02d}] {'PASS' if ok else 'FAIL'}  {name}"
    if detail:
        line += f"  ({detail})"
    ACCEPTANCE_LINES.append((num, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def suite_runs():
    """All shipped benchmark scenes evaluated once at the reference noise
    level (sigma = 0.02, seed 0, defaults).  Several suite-level trend
    tests share this computation; elapsed wall time is kept so the
    runtime budget can be checked against the actual work."""
    config = RunConfig(sigma=0.02)
    runs = {}
    start = time.perf_counter()
    for desc in suite_descriptors():
        gt = generate_scene(desc)
        runs[desc.scene_id] = run_scene(desc.scene_id, gt, config)
    elapsed = time.perf_counter() - start
    return config, runs, elapsed


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20260817))
