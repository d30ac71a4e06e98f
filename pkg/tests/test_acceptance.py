"""The ten acceptance criteria, exact arithmetic throughout.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS/FAIL line
per criterion.
"""

from __future__ import annotations

import shutil
import subprocess
import sys
import time

import pytest

from mfc.acceptance import CRITERIA, run_criterion

TITLES = {n: t for n, t, _ in CRITERIA}


@pytest.mark.parametrize("number", sorted(TITLES))
def test_criterion(number):
    t0 = time.perf_counter()
    r = run_criterion(number)
    dt = time.perf_counter() - t0
    print(f"\n[{'PASS' if r.ok else 'FAIL'}] {number:2d} {TITLES[number]}: {r.detail} ({dt:.1f}s)")
    assert r.ok, r.detail
    if number == 1:
        assert dt < 60


def test_selftest_exits_zero_in_time():
    exe = shutil.which("mfc")
    cmd = [exe, "selftest"] if exe else [sys.executable, "-m", "mfc.cli", "selftest"]
    t0 = time.perf_counter()
    r = subprocess.run(cmd, capture_output=True, text=True, timeout=300)
    dt = time.perf_counter() - t0
    print("\n" + r.stdout.rstrip())
    print(f"[{'PASS' if r.returncode == 0 and dt < 300 else 'FAIL'}] 10 mfc selftest exit {r.returncode} ({dt:.1f}s)")
    assert r.returncode == 0, r.stdout + r.stderr
    assert r.stdout.count("[PASS]") == len(CRITERIA)
    assert dt < 300
