"""Shared campaign fixtures.

The desk-scale campaigns take seconds each and feed several test modules,
so they are built once per session.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jumpheston.experiments import CampaignConfig, monte_carlo, sweep  # noqa: E402
from jumpheston.model import reference_params  # noqa: E402
from jumpheston.simulate import SimGrid  # noqa: E402

ACCEPTANCE_LINES: dict[str, tuple[bool, str]] = {}


def subcritical_config(T: float = 300.0, M: int = 1000, seed: int = 20240601) -> CampaignConfig:
    return CampaignConfig(reference_params(), SimGrid.from_step(T, 0.01), M=M, master_seed=seed)


def critical_config(M: int = 1000, seed: int = 20240602) -> CampaignConfig:
    return CampaignConfig(reference_params(critical=True), SimGrid(300.0, 30000), M=M, master_seed=seed)


@pytest.fixture(scope="session")
def subcritical_sweep():
    return sweep(subcritical_config(), [10.0, 100.0, 300.0])


@pytest.fixture(scope="session")
def critical_campaign():
    return monte_carlo(critical_config())


def record_acceptance(key: str, passed: bool, detail: str) -> None:
    """Log one sub-check of a numbered criterion; ``key`` looks like ``"3.e1"``."""
    verdict = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES[key] = (bool(passed), detail)
    print(f"{verdict} criterion {key}: {detail}")


def acceptance_summary() -> list[str]:
    """One PASS/FAIL line per criterion; a criterion passes only if all its parts do."""
    grouped: dict[int, list] = {}
    for key in sorted(ACCEPTANCE_LINES):
        grouped.setdefault(int(key.split(".")[0]), []).append((key, *ACCEPTANCE_LINES[key]))
    lines = []
    for number in sorted(grouped):
        parts = grouped[number]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        body = "; ".join(f"{k.split('.', 1)[1]} {'ok' if ok else 'FAIL'} [{d}]" for k, ok, d in parts)
        lines.append(f"{verdict} criterion {number}: {body}")
    return lines


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_summary():
        terminalreporter.write_line(line)


__all__ = ["critical_config", "replace", "subcritical_config"]
