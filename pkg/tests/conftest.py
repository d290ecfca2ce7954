from __future__ import annotations

import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


_CRITERIA: dict[int, tuple[bool, str]] = {}


def record_criterion(k: int, passed: bool, title: str, detail: str = "") -> None:
    """Store the outcome of acceptance criterion ``k`` for the end-of-run summary."""
    _CRITERIA[k] = (bool(passed), title if not detail else f"{title} [{detail}]")
    print(f"criterion {k}: {'PASS' if passed else 'FAIL'} - {_CRITERIA[k][1]}")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        ok, text = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {text}")
