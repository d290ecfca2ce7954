"""Report and grid containers shared by scenarios and verification suites."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

__all__ = ["Grid", "Verdict", "Report", "fmt"]


def fmt(v) -> str:
    """Deterministic text form of a table cell."""
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        v = v.item()
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return fmt(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        return _jsonable(v.item())
    return v


@dataclass
class Grid:
    """Parameter grid plus Monte Carlo budget; fields mirror the CLI flags."""

    L: list = field(default_factory=list)
    q: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    d: list = field(default_factory=list)
    seed: int = 0
    trials: int | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "Grid":
        known = {k: data[k] for k in ("L", "q", "gamma", "d", "seed", "trials") if k in data}
        unknown = set(data) - set(known) - {"scenario", "out", "format"}
        if unknown:
            raise ValueError(f"unknown grid keys: {sorted(unknown)}")
        for k in ("L", "q", "gamma", "d"):
            if k in known and not isinstance(known[k], list):
                known[k] = [known[k]]
        return cls(**known)

    @classmethod
    def from_json(cls, path: str) -> "Grid":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def merged(self, defaults: "Grid") -> "Grid":
        """Fill empty fields from ``defaults``."""
        return Grid(
            L=self.L or defaults.L,
            q=self.q or defaults.q,
            gamma=self.gamma or defaults.gamma,
            d=self.d or defaults.d,
            seed=self.seed,
            trials=self.trials if self.trials is not None else defaults.trials,
        )


@dataclass
class Verdict:
    """Outcome of one assertion.

    ``hard`` verdicts rest on exact computations and decide the exit status;
    soft ones are trends or Monte Carlo estimates.  ``passed is None`` marks
    a skipped check.
    """

    name: str
    ref: str
    passed: bool | None
    hard: bool = True
    detail: str = ""

    @property
    def status(self) -> str:
        if self.passed is None:
            return "skip"
        return "pass" if self.passed else "FAIL"


@dataclass
class Report:
    scenario: str
    columns: list
    rows: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    observations: dict = field(default_factory=dict)

    def add(self, name: str, ref: str, passed, *, hard: bool = True, detail: str = "") -> Verdict:
        v = Verdict(name, ref, None if passed is None else bool(passed), hard, detail)
        self.verdicts.append(v)
        return v

    def extend(self, other: "Report") -> None:
        self.verdicts.extend(other.verdicts)

    @property
    def hard_failures(self) -> list:
        return [v for v in self.verdicts if v.hard and v.passed is False]

    @property
    def soft_failures(self) -> list:
        return [v for v in self.verdicts if not v.hard and v.passed is False]

    @property
    def passed(self) -> bool:
        return not self.hard_failures

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([fmt(row.get(c)) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        data = {
            "scenario": self.scenario,
            "columns": list(self.columns),
            "rows": [{c: row.get(c) for c in self.columns} for row in self.rows],
            "verdicts": [asdict(v) | {"status": v.status} for v in self.verdicts],
            "fits": self.fits,
            "observations": self.observations,
        }
        return json.dumps(_jsonable(data), indent=2) + "\n"

    def traceability(self) -> str:
        """Plain-text table: assertion, the result it checks, kind and status."""
        if not self.verdicts:
            return ""
        w1 = max(len(v.name) for v in self.verdicts)
        w2 = max(len(v.ref) for v in self.verdicts)
        lines = [f"{'assertion':<{w1}}  {'checks':<{w2}}  kind  status"]
        for v in self.verdicts:
            kind = "hard" if v.hard else "soft"
            line = f"{v.name:<{w1}}  {v.ref:<{w2}}  {kind}  {v.status}"
            if v.detail and v.passed is not True:
                line += f"  ({v.detail})"
            lines.append(line)
        return "\n".join(lines) + "\n"
