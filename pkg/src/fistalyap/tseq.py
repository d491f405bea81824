"""Inertial step-size sequences (t_k) and momentum coefficients.

Supported rules, all with t_1 = 1:

* ``nesterov``            t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2            (theta = 0)
* ``chambolle-dossal:a``  t_k = 1 + (k - 1)/(a - 1), closed form        (theta = 1/2 iff a = 3)
* ``theta:th``            t_{k+1}^2 - t_k^2 = (1 - th) t_{k+1} + th t_k
* ``table:path``          explicit values read from a file
"""

from dataclasses import dataclass
import math
from pathlib import Path

import numpy as np

from .checks import CheckReport

NESTEROV = "nesterov"
CHAMBOLLE_DOSSAL = "chambolle-dossal"
THETA = "theta"
TABLE = "table"


@dataclass(frozen=True)
class StepRule:
    kind: str
    alpha: float | None = None
    theta_param: float | None = None
    values: tuple = ()

    def __post_init__(self):
        if self.kind == CHAMBOLLE_DOSSAL:
            if self.alpha is None or not self.alpha > 1:
                raise ValueError(f"chambolle-dossal needs alpha > 1, got {self.alpha}")
        elif self.kind == THETA:
            if self.theta_param is None or not 0.0 <= self.theta_param < 1.0:
                raise ValueError(f"theta must lie in [0, 1), got {self.theta_param}")
        elif self.kind == TABLE:
            if len(self.values) == 0:
                raise ValueError("table rule needs at least one value")
            if self.values[0] != 1.0:
                raise ValueError(f"table must start with t_1 = 1.0, got {self.values[0]}")
        elif self.kind != NESTEROV:
            raise ValueError(f"unknown rule kind {self.kind!r}")

    @classmethod
    def nesterov(cls):
        return cls(NESTEROV)

    @classmethod
    def chambolle_dossal(cls, alpha=3.0):
        return cls(CHAMBOLLE_DOSSAL, alpha=float(alpha))

    @classmethod
    def general_theta(cls, theta):
        return cls(THETA, theta_param=float(theta))

    @classmethod
    def table(cls, values):
        return cls(TABLE, values=tuple(float(v) for v in values))

    @property
    def theta(self):
        """The theta of the t-recurrence, or None if the rule has none."""
        if self.kind == NESTEROV:
            return 0.0
        if self.kind == THETA:
            return self.theta_param
        if self.kind == CHAMBOLLE_DOSSAL and self.alpha == 3.0:
            return 0.5
        return None

    def spec(self):
        if self.kind == NESTEROV:
            return NESTEROV
        if self.kind == CHAMBOLLE_DOSSAL:
            return f"{CHAMBOLLE_DOSSAL}:{self.alpha:g}"
        if self.kind == THETA:
            return f"{THETA}:{self.theta_param!r}"
        return f"{TABLE}:<{len(self.values)} values>"


def parse_rule(text, base_dir=None):
    """Parse a rule string such as ``"chambolle-dossal:3"`` or ``"table:t.txt"``."""
    text = text.strip()
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == NESTEROV and not arg:
        return StepRule.nesterov()
    if name == CHAMBOLLE_DOSSAL:
        return StepRule.chambolle_dossal(float(arg) if arg else 3.0)
    if name == THETA and arg:
        return StepRule.general_theta(float(arg))
    if name == TABLE and arg:
        path = Path(arg)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return StepRule.table(read_table(path))
    raise ValueError(f"cannot parse step rule {text!r}")


def read_table(path):
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    values = [float(ln) for ln in lines if ln]
    if not values or values[0] != 1.0:
        raise ValueError(f"{path}: first value must be 1.0")
    return values


def next_t(rule, t_k, k):
    """Return t_{k+1} given t_k (k is 1-based)."""
    if k < 1:
        raise ValueError(f"index must be >= 1, got {k}")
    if rule.kind == CHAMBOLLE_DOSSAL:
        return 1.0 + k / (rule.alpha - 1.0)
    if rule.kind == TABLE:
        if k >= len(rule.values):
            raise IndexError(f"table holds t_1..t_{len(rule.values)}, asked for t_{k + 1}")
        return rule.values[k]
    if not t_k > 0:
        raise ValueError(f"t_k must be positive, got {t_k}")
    if rule.kind == NESTEROV:
        return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_k * t_k))
    th = rule.theta_param
    a = 1.0 - th
    return 0.5 * (a + math.sqrt(a * a + 4.0 * (t_k * t_k + th * t_k)))


def alpha_k(t_k, t_next):
    """Momentum coefficient (t_k - 1) / t_{k+1}."""
    if not t_next > 0:
        raise ValueError(f"t_next must be positive, got {t_next}")
    return (t_k - 1.0) / t_next


@dataclass(frozen=True)
class TSeqPrefix:
    """The values t_1..t_K of a rule.  ``values[0]`` holds t_1."""

    rule: StepRule
    values: np.ndarray

    @property
    def K(self):
        return len(self.values)

    def t(self, k):
        if not 1 <= k <= self.K:
            raise IndexError(f"t_{k} outside 1..{self.K}")
        return float(self.values[k - 1])


def generate(rule, K):
    """First K terms of the rule's sequence."""
    if K < 1:
        raise ValueError("K must be positive")
    if rule.kind == CHAMBOLLE_DOSSAL:
        ks = np.arange(1, K + 1, dtype=float)
        vals = 1.0 + (ks - 1.0) / (rule.alpha - 1.0)
    elif rule.kind == TABLE:
        if K > len(rule.values):
            raise IndexError(f"table holds {len(rule.values)} values, asked for {K}")
        vals = np.array(rule.values[:K], dtype=float)
    else:
        vals = np.empty(K)
        t = 1.0
        vals[0] = t
        for k in range(1, K):
            t = next_t(rule, t, k)
            vals[k] = t
    vals.setflags(write=False)
    return TSeqPrefix(rule, vals)


def s_k(prefix, theta, k):
    """s_k = t_k^2 + theta t_k."""
    t = prefix.t(k)
    return t * t + theta * t


def alphas(prefix):
    """alpha_k for k = 1..K-1 as an array."""
    t = prefix.values
    return (t[:-1] - 1.0) / t[1:]


def validate_admissible(prefix):
    """Check t_1 = 1, t_k > 0 and t_{k+1}^2 - t_k^2 <= t_{k+1} for the whole prefix.

    The violation reported is the excess ``t_{k+1}^2 - t_k^2 - t_{k+1}`` minus
    the slack ``1e-12 max(1, t_{k+1}^2)``, so the tolerance is 0.
    """
    name = "admissible"
    try:
        t = np.asarray(prefix.values if isinstance(prefix, TSeqPrefix) else prefix, dtype=float)
    except (TypeError, ValueError) as exc:
        return CheckReport.failure(name, f"malformed sequence: {exc}")
    if t.ndim != 1 or t.size == 0:
        return CheckReport.failure(name, "empty or non-1-D sequence")
    if not np.all(np.isfinite(t)):
        bad = int(np.flatnonzero(~np.isfinite(t))[0]) + 1
        return CheckReport.failure(name, "non-finite term", at_k=bad)
    if t[0] != 1.0:
        return CheckReport.failure(name, f"t_1 = {t[0]!r}, must be 1", at_k=1)
    if np.any(t <= 0):
        bad = int(np.flatnonzero(t <= 0)[0]) + 1
        return CheckReport.failure(name, "non-positive term", at_k=bad)
    excess = t[1:] ** 2 - t[:-1] ** 2 - t[1:]
    slack = 1e-12 * np.maximum(1.0, t[1:] ** 2)
    ks = np.arange(1, t.size)
    viol = excess - slack
    bad = np.flatnonzero(viol > 0)
    if bad.size:
        i = int(bad[0])
        return CheckReport(name, False, float(viol[i]), int(ks[i]), 0.0,
                           f"at k={ks[i]}: t_(k+1)^2 - t_k^2 = {t[i + 1] ** 2 - t[i] ** 2:.6g} "
                           f"> t_(k+1) = {t[i + 1]:.6g} (excess {excess[i]:.6g})")
    worst = float(np.max(viol)) if viol.size else -1.0
    return CheckReport(name, True, max(worst, 0.0), None, 0.0,
                       f"{t.size} terms; violation = excess - 1e-12*max(1, t_(k+1)^2)")


def check_recurrence(prefix, theta):
    """|t_{k+1}^2 - t_k^2 - (1-theta) t_{k+1} - theta t_k| relative to t_{k+1}^2; tol 1e-10."""
    t = prefix.values
    resid = t[1:] ** 2 - t[:-1] ** 2 - (1.0 - theta) * t[1:] - theta * t[:-1]
    return CheckReport.from_violations(
        "t-recurrence", np.abs(resid) / t[1:] ** 2, np.arange(1, t.size), 1e-10,
        "relative residual of the t-recurrence")


def check_growth(prefix, theta):
    """t_k >= (1 - theta)(k + 1)/2 with slack 1e-9 k."""
    t = prefix.values
    ks = np.arange(1, t.size + 1)
    viol = (1.0 - theta) * (ks + 1) / 2.0 - t - 1e-9 * ks
    return CheckReport.from_violations(
        "t-growth", viol, ks, 0.0, "lower bound minus t_k minus slack 1e-9 k")
