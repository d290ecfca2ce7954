"""Verification suites: named groups of exact check batteries."""
from __future__ import annotations

from . import checks
from .report import Report

__all__ = ["SUITES", "verify", "run_suite"]


def _equo(r: Report) -> None:
    table = checks.timescale_table(range(1, 9), checks.DEFAULT_Q)
    checks.check_equivalence(r, table=table)
    checks.check_anchors(r)
    checks.check_monotone(r, iterative_L_max=12)


def _hitting_comparisons(r: Report) -> None:
    checks.check_hitting_comparisons(r)
    checks.check_survival_laws(r)


def _paletti(r: Report) -> None:
    checks.check_variational(r)
    checks.check_ladder(r)


def _gamma(r: Report) -> None:
    checks.check_boundary(r)
    checks.check_dirichlet_gamma_bound(r)
    checks.check_reachable_sets(r)


SUITES = {
    "core": checks.check_core,
    "coupling": lambda r: checks.check_coupling(r),
    "equo": _equo,
    "dominare": _hitting_comparisons,
    "paletti": _paletti,
    "astar": lambda r: checks.check_astar(r),
    "gamma": _gamma,
    "flows": lambda r: checks.check_flows(r),
    "capacity": lambda r: checks.check_capacity(r),
}


def run_suite(name: str) -> Report:
    """Run one suite (or ``all``) and collect its verdicts."""
    if name != "all" and name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}")
    report = Report(f"verify {name}", columns=[])
    for key in (SUITES if name == "all" else [name]):
        SUITES[key](report)
    return report


def verify(name: str) -> tuple[int, Report]:
    """Exit status (0 when every hard verdict passes, 1 otherwise) and the report."""
    report = run_suite(name)
    return (0 if report.passed else 1), report
