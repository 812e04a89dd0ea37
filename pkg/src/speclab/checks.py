"""Named inequality checks with a discretization slack."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

DEFAULT_SLACK = 0.02
# absolute floor so that 0 <= 0 cases are not decided by round-off
ABS_TOL = 1e-8

RELATIONS = ("<=", ">=")


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    statement: str
    relation: str
    lhs: Optional[float] = None
    rhs: Optional[float] = None
    verdict: str = "skipped"  # "pass" | "fail" | "skipped"
    reason: str = ""
    discretization_slack: float = DEFAULT_SLACK
    inputs: str = ""
    note: str = ""
    details: dict = field(default_factory=dict, compare=False)

    @property
    def slack(self) -> Optional[float]:
        """Signed margin: ``rhs - lhs`` for ``<=`` and ``lhs - rhs`` for ``>=``."""
        if self.lhs is None or self.rhs is None:
            return None
        d = self.rhs - self.lhs
        if self.relation == ">=":
            d = -d
        return d if not math.isnan(d) else None

    @property
    def ratio(self) -> Optional[float]:
        """Dimensionless ``small side / large side`` (1 at equality, < 1 when strict)."""
        if self.lhs is None or self.rhs is None:
            return None
        small, large = (self.lhs, self.rhs) if self.relation == "<=" else (self.rhs, self.lhs)
        if math.isinf(large):
            return 0.0
        if large == 0.0:
            return 1.0 if small == 0.0 else math.copysign(math.inf, small)
        return small / large

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "statement": self.statement,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "relation": self.relation,
            "slack": self.slack,
            "ratio": self.ratio,
            "verdict": self.verdict,
            "reason": self.reason,
            "note": self.note,
            "discretization_slack": self.discretization_slack,
            "inputs": self.inputs,
        }


def holds(lhs: float, rhs: float, relation: str, slack: float = DEFAULT_SLACK,
          atol: float = ABS_TOL) -> bool:
    """Relation after widening each side by ``slack`` relative to itself.

    For ``a <= b`` this tests ``a - slack |a| <= b + slack |b| + atol``;
    ``rhs = +inf`` always holds.
    """
    if relation not in RELATIONS:
        raise ValueError(f"relation must be one of {RELATIONS}")
    small, large = (lhs, rhs) if relation == "<=" else (rhs, lhs)
    if math.isnan(small) or math.isnan(large):
        return False
    if large == math.inf or small == -math.inf:
        return True
    return small - slack * abs(small) <= large + slack * abs(large) + atol


def evaluate(name: str, statement: str, lhs: float, rhs: float, relation: str = "<=",
             slack: float = DEFAULT_SLACK, inputs: str = "", note: str = "",
             **details) -> InequalityCheck:
    lhs, rhs = float(lhs), float(rhs)
    verdict = "pass" if holds(lhs, rhs, relation, slack) else "fail"
    return InequalityCheck(name, statement, relation, lhs, rhs, verdict, "", slack, inputs,
                           note, details)


def skipped(name: str, statement: str, reason: str, relation: str = "<=",
            slack: float = DEFAULT_SLACK, inputs: str = "") -> InequalityCheck:
    if not reason:
        raise ValueError("a skipped check needs a reason")
    return InequalityCheck(name, statement, relation, None, None, "skipped", reason, slack,
                           inputs)
