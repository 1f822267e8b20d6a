"""Pass/fail ledger for invariant checks."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field


@dataclass
class Check:
    name: str
    passed: bool
    worst: float
    tolerance: float
    where: float | None = None
    detail: str = ""


@dataclass
class DiagnosticsReport:
    """Ordered collection of :class:`Check` entries."""

    title: str
    checks: list[Check] = field(default_factory=list)

    def add(self, name, passed, worst, tolerance, where=None, detail=""):
        chk = Check(name, bool(passed), float(worst), float(tolerance),
                    None if where is None else float(where), detail)
        self.checks.append(chk)
        return chk

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            flag = "PASS" if c.passed else "FAIL"
            loc = "" if c.where is None else f" at {c.where:.6g}"
            out.append(f"{flag} {c.name}: worst={c.worst:.6g} tol={c.tolerance:.3g}{loc}"
                       + (f" ({c.detail})" if c.detail else ""))
        return out

    def to_json(self) -> str:
        return json.dumps({"title": self.title, "passed": self.passed,
                           "checks": [asdict(c) for c in self.checks]},
                          indent=2, sort_keys=True)

    def __str__(self) -> str:
        return "\n".join([self.title] + self.lines())
