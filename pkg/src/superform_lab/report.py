"""Check records, reports and their JSON/text rendering."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Iterable

EXACT_ZERO = "exact-zero"


@dataclass
class CheckResult:
    """Outcome of one verification.

    ``residual`` is a float or the string "exact-zero".  ``label`` names the
    identity being checked in words.
    """

    check_id: str
    label: str
    residual: float | str
    tolerance: float
    passed: bool
    inputs: dict = field(default_factory=dict)
    detail: dict = field(default_factory=dict)
    informational: bool = False
    elapsed: float = 0.0

    @property
    def inputs_digest(self) -> str:
        blob = json.dumps(self.inputs, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def payload(self) -> dict:
        d = asdict(self)
        d.pop("elapsed")
        d["inputs_digest"] = self.inputs_digest
        return _jsonable(d)


def exact_or_float(zero: bool, value: float) -> float | str:
    return EXACT_ZERO if zero else float(value)


def make_check(check_id: str, label: str, residual, tolerance: float, *, inputs=None,
               detail=None, informational: bool = False, passed: bool | None = None) -> CheckResult:
    if passed is None:
        passed = residual == EXACT_ZERO or (isinstance(residual, float) and residual <= tolerance)
    return CheckResult(check_id, label, residual, tolerance, bool(passed), dict(inputs or {}),
                       dict(detail or {}), informational)


def timed(fn: Callable[[], CheckResult]) -> CheckResult:
    t0 = time.perf_counter()
    res = fn()
    res.elapsed = time.perf_counter() - t0
    return res


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, float):
        return float(repr(x)) if x == x else "nan"
    if isinstance(x, (int, str, bool)) or x is None:
        return x
    return str(x)


@dataclass
class Report:
    checks: list[CheckResult] = field(default_factory=list)
    scenario: dict = field(default_factory=dict)

    def add(self, items: CheckResult | Iterable[CheckResult]) -> None:
        if isinstance(items, CheckResult):
            items = [items]
        for c in items:
            if any(c.check_id == o.check_id for o in self.checks):
                raise ValueError(f"duplicate check id {c.check_id}")
            self.checks.append(c)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.informational)

    def payload(self) -> dict:
        return {
            "scenario": _jsonable(self.scenario),
            "passed": self.passed,
            "checks": [c.payload() for c in sorted(self.checks, key=lambda c: c.check_id)],
        }

    def header(self) -> dict:
        return {
            "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "wall_time": {c.check_id: round(c.elapsed, 6) for c in self.checks},
        }

    def to_json(self) -> str:
        return json.dumps({"header": self.header(), "payload": self.payload()}, indent=2, sort_keys=True)


def payload_bytes(doc: dict) -> bytes:
    """Canonical bytes of the timestamp-free part of a report document."""
    return json.dumps(doc["payload"], sort_keys=True, separators=(",", ":")).encode()


def render(doc: dict) -> str:
    """Sorted text table for a loaded report document."""
    if not isinstance(doc, dict) or "payload" not in doc or "checks" not in doc["payload"]:
        raise ValueError("malformed report")
    rows = sorted(doc["payload"]["checks"], key=lambda c: c["check_id"])
    head = f"{'check':<44} {'status':<6} {'residual':>14} {'tol':>10}  identity"
    lines = [head, "-" * len(head)]
    for c in rows:
        status = "PASS" if c["passed"] else ("INFO" if c.get("informational") else "FAIL")
        r = c["residual"]
        rs = r if isinstance(r, str) else f"{r:.3e}"
        lines.append(f"{c['check_id']:<44} {status:<6} {rs:>14} {c['tolerance']:>10.1e}  {c['label']}")
    npass = sum(1 for c in rows if c["passed"])
    lines.append(f"{npass}/{len(rows)} checks passed")
    return "\n".join(lines)
