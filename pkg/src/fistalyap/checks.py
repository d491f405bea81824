"""Structured pass/fail outcome shared by all verification routines."""

from dataclasses import asdict, dataclass
import math

import numpy as np


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one invariant or bound check.

    ``passed`` is always ``worst_violation <= tolerance``; how the violation
    is normalized is stated in ``details``.
    """

    name: str
    passed: bool
    worst_violation: float
    at_k: int | None
    tolerance: float
    details: str = ""
    asserted: bool = True

    def __post_init__(self):
        # numpy scalars sneak in from comparisons; keep plain Python types
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "asserted", bool(self.asserted))
        object.__setattr__(self, "worst_violation", float(self.worst_violation))
        object.__setattr__(self, "tolerance", float(self.tolerance))
        if self.at_k is not None:
            object.__setattr__(self, "at_k", int(self.at_k))

    @classmethod
    def from_violations(cls, name, violations, ks, tolerance, details="", asserted=True):
        """Build a report from per-index violation amounts (positive = bad)."""
        violations = np.asarray(violations, dtype=float)
        if violations.size == 0:
            return cls(name, True, 0.0, None, float(tolerance), details, asserted)
        if np.any(np.isnan(violations)):
            i = int(np.flatnonzero(np.isnan(violations))[0])
            return cls(name, False, math.inf, int(ks[i]), float(tolerance),
                       details + " (nan encountered)", asserted)
        i = int(np.argmax(violations))
        worst = max(float(violations[i]), 0.0)
        return cls(name, worst <= tolerance, worst, int(ks[i]) if worst > 0 else None,
                   float(tolerance), details, asserted)

    @classmethod
    def failure(cls, name, reason, at_k=None):
        return cls(name, False, math.inf, at_k, 0.0, reason)

    def to_dict(self):
        d = asdict(self)
        if math.isinf(d["worst_violation"]):
            d["worst_violation"] = "inf"
        return d

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        at = "-" if self.at_k is None else str(self.at_k)
        return (f"[{status}] {self.name}: worst={self.worst_violation:.3e} "
                f"tol={self.tolerance:.3e} at_k={at}")
