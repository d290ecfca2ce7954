"""Scenario runners, verification suites and the command-line interface."""
from __future__ import annotations

from .report import Grid, Report, Verdict
from .scenarios import SCENARIOS, run_scenario
from .verify import SUITES, verify

__all__ = ["Grid", "Report", "Verdict", "SCENARIOS", "SUITES", "run_scenario", "verify"]
