"""Structured pass/fail records for numerical verification runs."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

PROVENANCE = ("PAPER", "DERIVED", "TRIVIAL")


def _jsonable(x):
    if isinstance(x, (bool, int, str)) or x is None:
        return x
    if isinstance(x, float):
        return x if math.isfinite(x) else str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    try:
        return _jsonable(x.tolist())
    except AttributeError:
        return str(x)


@dataclass
class Check:
    name: str
    expected: Any
    actual: Any
    tolerance: float | None
    passed: bool
    provenance: str = "DERIVED"
    note: str = ""

    def __post_init__(self):
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        self.passed = bool(self.passed)


@dataclass
class VerificationReport:
    title: str
    checks: list[Check] = field(default_factory=list)
    info: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, expected, actual, tolerance=None, passed=None,
            provenance="DERIVED", note="") -> Check:
        if passed is None:
            if tolerance is None:
                passed = expected == actual
            else:
                passed = abs(actual - expected) <= tolerance
        c = Check(name, expected, actual, tolerance, passed, provenance, note)
        self.checks.append(c)
        return c

    def close(self, name, expected, actual, tol, provenance="PAPER", note="") -> Check:
        return self.add(name, expected, actual, tol, abs(actual - expected) <= tol, provenance, note)

    def at_most(self, name, bound, actual, provenance="DERIVED", note="") -> Check:
        return self.add(name, f"<= {bound:.3e}", actual, bound, actual <= bound, provenance, note)

    def at_least(self, name, bound, actual, provenance="PAPER", note="") -> Check:
        return self.add(name, f">= {bound:.6g}", actual, None, actual >= bound, provenance, note)

    def within(self, name, lo, hi, actual, provenance="PAPER", note="") -> Check:
        return self.add(name, f"[{lo}, {hi}]", actual, None, lo <= actual <= hi, provenance, note)

    def equal(self, name, expected, actual, provenance="PAPER", note="") -> Check:
        return self.add(name, expected, actual, None, expected == actual, provenance, note)

    def extend(self, other: "VerificationReport", prefix: str = "") -> None:
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.expected, c.actual, c.tolerance,
                                     c.passed, c.provenance, c.note))
        for k, v in other.info.items():
            self.info[prefix + k] = v

    def to_json(self) -> dict:
        return {
            "title": self.title,
            "passed": self.passed,
            "checks": [_jsonable(asdict(c)) for c in self.checks],
            "info": _jsonable(self.info),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    def render(self) -> str:
        lines = [f"== {self.title}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            actual = f"{c.actual:.10g}" if isinstance(c.actual, float) else c.actual
            lines.append(f"  [{'ok' if c.passed else 'FAIL'}] {c.name}: {actual} "
                         f"(expected {c.expected}) [{c.provenance}]"
                         + (f"  {c.note}" if c.note else ""))
        for k, v in self.info.items():
            lines.append(f"  {k} = {v}")
        return "\n".join(lines)
