"""Lyapunov quantities along a solver trace and checks of their properties.

Notation (k >= 1, z a minimizer, lam the step size)::

    z_k  = t_k (x_k - x_{k-1}) + x_{k-1}
    u_k  = z_k + theta (x_k - x_{k-1})
    s_k  = t_k^2 + theta t_k
    W_k  = lam (F(x_k) - F*) + 1/2 ||x_k - x_{k-1}||^2
    E_k  = lam t_k^2 (F(x_k) - F*) + 1/2 ||z_k - z||^2
    h_k  = 1/2 ||x_k - z||^2

With lam = 1 the energies are the textbook ones; the factor lam keeps them
nonincreasing for every admissible step size lam <= 1/L.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np

from .checks import CheckReport
from .summation import cumsum_compensated


@dataclass(frozen=True)
class LyapunovRecord:
    k: int
    z: np.ndarray
    u: np.ndarray
    s: float
    W: float
    E: float
    h: float
    vel: float
    gap: float


@dataclass
class LyapunovSeries:
    """Per-iteration proof quantities, stored column-wise.

    Row j refers to iteration ``ks[j]``; ``x``/``x_prev`` are x_k and x_{k-1}.
    """

    anchor: np.ndarray
    theta: float
    theta_flagged: bool
    lam: float
    ks: np.ndarray
    t: np.ndarray
    x: np.ndarray
    x_prev: np.ndarray
    z: np.ndarray
    u: np.ndarray
    s: np.ndarray
    s_cumulative: np.ndarray
    W: np.ndarray
    E: np.ndarray
    h: np.ndarray
    vel: np.ndarray
    gap: np.ndarray
    s_discrepancy: float = 0.0

    def __len__(self):
        return len(self.ks)

    def record(self, k):
        j = int(np.searchsorted(self.ks, k))
        if j >= len(self.ks) or self.ks[j] != k:
            raise KeyError(f"no record for k={k}")
        return LyapunovRecord(int(self.ks[j]), self.z[j], self.u[j], float(self.s[j]),
                              float(self.W[j]), float(self.E[j]), float(self.h[j]),
                              float(self.vel[j]), float(self.gap[j]))

    def __iter__(self):
        for k in self.ks:
            yield self.record(int(k))

    @property
    def E1(self):
        return float(self.E[0])

    @property
    def W1(self):
        return float(self.W[0])

    @property
    def C_z(self):
        """sqrt(2 E_1) + theta sqrt(2 W_1), the bound on ||u_k - z|| and ||x_k - z||."""
        return math.sqrt(2.0 * self.E1) + self.theta * math.sqrt(2.0 * self.W1)

    @property
    def velocity_constant(self):
        """sqrt(2) (2 sqrt(E_1) + theta sqrt(W_1)); ||x_k - x_{k-1}|| <= this / t_k."""
        return math.sqrt(2.0) * (2.0 * math.sqrt(self.E1) + self.theta * math.sqrt(self.W1))


def _resolve_theta(trace, theta):
    if theta is not None:
        return float(theta), False
    th = trace.config.rule.theta
    if th is None:
        return 0.0, True
    return float(th), False


def _consecutive_rows(trace):
    """Indices j >= 1 in the stored iterates with ks[j-1] == ks[j] - 1."""
    ks = trace.ks
    j = np.arange(1, len(ks))
    return j[ks[j - 1] == ks[j] - 1]


def lyapunov_series(trace, z, theta=None):
    """Compute all proof quantities anchored at the minimizer ``z``.

    ``theta`` defaults to the rule's; rules without one (tables, alpha != 3)
    use 0 and set ``theta_flagged``.
    """
    if trace.gaps is None:
        raise ValueError("optimal value unknown: diagnostics refuse to estimate it")
    theta, flagged = _resolve_theta(trace, theta)
    z = np.asarray(z, dtype=float)
    rows = _consecutive_rows(trace)
    if rows.size == 0 or trace.ks[rows[0]] != 1:
        raise ValueError("trace must contain the pair (x_0, x_1) and consecutive iterates")
    ks = trace.ks[rows]
    lam = trace.config.lam
    t = trace.t_values[ks - 1]
    x = trace.xs[rows]
    xp = trace.xs[rows - 1]
    d = x - xp
    zk = t[:, None] * d + xp
    uk = zk + theta * d
    s = t * t + theta * t
    s_cum_all = cumsum_compensated(trace.t_values, start=theta)
    s_cum = s_cum_all[ks - 1]
    gap = trace.gaps[ks]
    vel = trace.vel[ks]
    W = lam * gap + 0.5 * vel * vel
    dz = zk - z
    E = lam * t * t * gap + 0.5 * np.einsum("ij,ij->i", dz, dz)
    dx = x - z
    h = 0.5 * np.einsum("ij,ij->i", dx, dx)
    disc = float(np.max(np.abs(s - s_cum) / s))
    return LyapunovSeries(z, theta, flagged, lam, ks, t, x, xp, zk, uk, s, s_cum,
                          W, E, h, vel, gap, disc)


# ----------------------------------------------------------------- checks

def check_monotone(series):
    """(W report, E report): both sequences must be nonincreasing."""
    out = []
    for name, vals in (("monotone-W", series.W), ("monotone-E", series.E)):
        tol = 1e-10 * max(1.0, float(vals[0]))
        viol = np.maximum(0.0, np.diff(vals))
        out.append(CheckReport.from_violations(
            name, viol, series.ks[1:], tol,
            f"max(0, value_(k+1) - value_k); tol = 1e-10*max(1, value_1); value_1={vals[0]:.6g}"))
    return tuple(out)


def check_rate(series):
    """lam (F(x_k)-F*) <= E_1/t_k^2 <= 4 E_1 / ((1-theta)^2 (k+1)^2)."""
    E1, th, lam = series.E1, series.theta, series.lam
    t, ks = series.t, series.ks
    v1 = lam * series.gap * t * t - E1
    # E_1/t^2 <= 4 E_1/((1-theta)^2 (k+1)^2), multiplied through by t^2
    v2 = E1 * (1.0 - 4.0 * t * t / ((1.0 - th) ** 2 * (ks + 1.0) ** 2))
    viol = v1 if series.theta_flagged else np.maximum(v1, v2)
    ratio = lam * series.gap * t * t / E1 if E1 > 0 else np.zeros_like(t)
    return CheckReport.from_violations(
        "rate", viol, ks, 1e-10 * E1,
        f"lam*gap*t_k^2 - E_1 and t_k-growth form of the second inequality; "
        f"E_1={E1:.6g}, max ratio lam*gap*t^2/E_1={float(np.max(ratio)):.6g}, "
        f"final ratio={float(ratio[-1]):.6g}"
        + ("; theta unknown for this rule, second inequality skipped" if series.theta_flagged else ""))


def ergodic_reconstruct(trace, theta=None):
    """Rebuild x_k = (theta x_0 + sum_{i<=k} t_i u_i) / s_k.

    Returns (reconstruction report, weight-simplex report).  The first
    report's violation is ||xhat_k - x_k|| / (k max_{i<=k} ||u_i||), tol 1e-8;
    the second's is |sum_i t_i/s_k - 1| / k, tol 1e-12.
    """
    if trace.thinned:
        raise ValueError("ergodic reconstruction needs an unthinned trace")
    theta, flagged = _resolve_theta(trace, theta)
    X = trace.xs
    K = len(X) - 1
    t = trace.t_values[:K]
    d = X[1:] - X[:-1]
    u = t[:, None] * d + X[:-1] + theta * d  # u_1..u_K
    terms = t[:, None] * u
    acc = cumsum_compensated(terms, start=theta * X[0])
    s = t * t + theta * t
    xhat = acc / s[:, None]
    err = np.linalg.norm(xhat - X[1:], axis=1)
    unorm = np.linalg.norm(u, axis=1)
    umax = np.maximum.accumulate(np.maximum(unorm, np.linalg.norm(X[0])))
    ks = np.arange(1, K + 1)
    scale = ks * np.where(umax > 0, umax, 1.0)
    rec = CheckReport.from_violations(
        "ergodic", err / scale, ks, 1e-8,
        "||xhat_k - x_k|| / (k max_i ||u_i||)" + ("; theta treated as 0" if flagged else ""))
    wsum = cumsum_compensated(t, start=theta) / s
    neg = bool(np.any(t < 0)) or theta < 0
    simplex = CheckReport.from_violations(
        "weight-simplex", np.abs(wsum - 1.0) / ks, ks, 1e-12,
        "|sum_i theta_(k,i) - 1| / k" + ("; NEGATIVE WEIGHT FOUND" if neg else ""))
    if neg:
        simplex = CheckReport(simplex.name, False, math.inf, None, 1e-12, simplex.details)
    return rec, simplex


def check_bounds(series):
    """Three reports: ||x_k - z|| <= C_z, ||u_k - z|| <= C_z, velocity bound."""
    C = series.C_z
    tol = 1e-10 * max(1.0, C)
    ks = series.ks
    xz = np.sqrt(2.0 * series.h)
    uz = np.linalg.norm(series.u - series.anchor, axis=1)
    vb = series.velocity_constant / series.t
    return (
        CheckReport.from_violations("bound-x", xz - C, ks, tol, f"||x_k - z|| - C_z, C_z={C:.6g}"),
        CheckReport.from_violations("bound-u", uz - C, ks, tol, f"||u_k - z|| - C_z, C_z={C:.6g}"),
        CheckReport.from_violations(
            "bound-velocity", series.vel - vb, ks, tol,
            f"||x_k - x_(k-1)|| - {series.velocity_constant:.6g}/t_k"),
    )


def check_scaled_velocity(series):
    """t_k ||x_k - x_{k-1}|| <= sqrt(2 E_1) + C_z."""
    C = series.C_z
    bound = math.sqrt(2.0 * series.E1) + C
    return CheckReport.from_violations(
        "scaled-velocity", series.t * series.vel - bound, series.ks, 1e-10 * max(1.0, C),
        f"t_k ||x_k - x_(k-1)|| - (sqrt(2 E_1) + C_z), bound={bound:.6g}")


def check_jensen(series, x0):
    """||x_k - z|| <= max_{0<=i<=k} ||u_i - z|| with u_0 = x_0."""
    uz = np.linalg.norm(series.u - series.anchor, axis=1)
    run_max = np.maximum.accumulate(np.maximum(uz, np.linalg.norm(np.asarray(x0) - series.anchor)))
    C = series.C_z
    return CheckReport.from_violations(
        "jensen", np.sqrt(2.0 * series.h) - run_max, series.ks, 1e-10 * max(1.0, C),
        "||x_k - z|| - max_(i<=k) ||u_i - z||")


def check_energy_identity(series):
    """E_k equals its expansion in terms of gap, velocity and h_k."""
    t, d = series.t, series.x - series.x_prev
    inner = np.einsum("ij,ij->i", d, series.x - series.anchor)
    rhs = (series.lam * t * t * series.gap + 0.5 * (t - 1.0) ** 2 * series.vel ** 2
           + (t - 1.0) * inner + series.h)
    scale = max(1.0, series.C_z ** 2)
    return CheckReport.from_violations(
        "energy-identity", np.abs(series.E - rhs) / scale, series.ks, 1e-10,
        "|E_k - expansion| / max(1, C_z^2)")


def check_z_representation(series):
    """t_k(x_k - x_{k-1}) + x_{k-1} vs t_k x_k - (t_k - 1) x_{k-1}.

    The second form cancels, so rounding grows like t_k; tolerance 1e-12 on
    the scale t_k max(1, ||x_k||, ||x_{k-1}||).
    """
    t = series.t
    alt = t[:, None] * series.x - (t - 1.0)[:, None] * series.x_prev
    diff = np.linalg.norm(series.z - alt, axis=1)
    scale = t * np.maximum(1.0, np.maximum(np.linalg.norm(series.x, axis=1),
                                           np.linalg.norm(series.x_prev, axis=1)))
    return CheckReport.from_violations(
        "z-representation", diff / scale, series.ks, 1e-12,
        "||z_k - (t_k x_k - (t_k-1) x_(k-1))|| / (t_k max(1, ||x||))")


def check_s_identity(series):
    """|s_k - (theta + sum_{i<=k} t_i)| <= 1e-10 s_k."""
    return CheckReport.from_violations(
        "s-identity", np.abs(series.s - series.s_cumulative) / series.s, series.ks, 1e-10,
        "relative gap between t_k^2 + theta t_k and the compensated cumulative sum")


def check_ravine(series, trace, from_k=1):
    """||y_k - x_k|| <= vel_k and <= velocity bound / t_k, for k >= from_k."""
    y_ks, ys = trace.y_ks, trace.ys
    rows = {int(k): j for j, k in enumerate(series.ks)}
    ks, gaps_v, gaps_b = [], [], []
    for j, k in enumerate(y_ks):
        k = int(k)
        if k < from_k or k not in rows:
            continue
        r = rows[k]
        gy = float(np.linalg.norm(ys[j] - series.x[r]))
        ks.append(k)
        gaps_v.append(gy - series.vel[r] * (1.0 + 1e-12) - 1e-300)
        gaps_b.append(gy - series.velocity_constant / series.t[r])
    viol = np.maximum(np.asarray(gaps_v), np.asarray(gaps_b)) if ks else np.array([])
    return CheckReport.from_violations(
        "ravine", viol, np.asarray(ks), 1e-10 * max(1.0, series.C_z),
        f"||y_k - x_k|| against vel_k and the velocity bound, k >= {from_k}")


# --------------------------------------------------------- two minimizers

@dataclass
class TwoPointSeries:
    ks: np.ndarray  # 0..K
    R: np.ndarray  # R_0..R_K
    D: np.ndarray  # D_0 is nan
    R_inner: np.ndarray  # <x_k - v, v - z> + 1/2 ||v - z||^2
    t: np.ndarray  # t_1..t_K
    s: np.ndarray  # s_1..s_K
    theta: float
    vz: float
    eps_tail: float
    D_star: float
    a_priori_tail: float
    reports: tuple = field(default_factory=tuple)


def two_point_series(trace, z, v, theta=None, problem=None):
    """R_k = h_{z,k} - h_{v,k} and D_k = E_{z,k} - E_{v,k} with their identities.

    R_0 is taken from x_0 (h at k = 0).  Returns a TwoPointSeries whose
    ``reports`` hold the D-identity, dR-identity and tail checks.
    """
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.array_equal(z, v):
        raise ValueError("two-point analysis needs distinct minimizers z != v")
    if problem is not None:
        lam = 1.0 / problem.L
        for name, p in (("z", z), ("v", v)):
            res = np.linalg.norm(p - problem.prox(lam, p - lam * problem.gradient(p)))
            if res > 1e-8 * max(1.0, np.linalg.norm(p)):
                raise ValueError(f"{name} is not a minimizer (fixed-point residual {res:.3e})")
    if trace.thinned:
        raise ValueError("two-point analysis needs an unthinned trace")
    sz = lyapunov_series(trace, z, theta)
    sv = lyapunov_series(trace, v, theta)
    theta = sz.theta
    X = trace.xs
    K = len(X) - 1
    w = v - z
    vz = float(np.linalg.norm(w))
    hz = 0.5 * np.sum((X - z) ** 2, axis=1)
    hv = 0.5 * np.sum((X - v) ** 2, axis=1)
    R = hz - hv
    R_inner = (X - v) @ w + 0.5 * vz * vz
    D = np.full(K + 1, np.nan)
    D[1:] = sz.E - sv.E
    t = sz.t
    ks = np.arange(1, K + 1)
    step_inner = (X[1:] - X[:-1]) @ w

    scale_D = max(1.0, sz.E1, sv.E1)
    d_id = np.abs(D[1:] - ((t - 1.0) * step_inner + R[1:])) / scale_D
    scale_R = max(1.0, float(np.max(hz + hv)))
    dr_id = np.abs(np.diff(R) - step_inner) / scale_R

    velK = float(trace.vel[K])
    tK = float(t[-1])
    eps = (tK - 1.0) * velK * vz + 1e-10
    a_priori = (math.sqrt(2.0 * sz.E1) + sz.C_z) * vz * (tK - 1.0) / tK
    tail = max(abs(R[K] - D[K]), abs(D[K] - R_inner[K]))
    reports = (
        CheckReport.from_violations(
            "two-point-D-identity", d_id, ks, 1e-10,
            f"|D_k - (t_k-1)<x_k-x_(k-1), v-z> - R_k| / {scale_D:.6g}"),
        CheckReport.from_violations(
            "two-point-dR-identity", dr_id, ks, 1e-10,
            f"|R_k - R_(k-1) - <x_k - x_(k-1), v-z>| / {scale_R:.6g}"),
        CheckReport(
            "two-point-tail", tail <= eps, float(tail), K, float(eps),
            f"max(|R_K - D_K|, |D_K - (<x_K - v, v-z> + |v-z|^2/2)|) vs "
            f"eps_tail = (t_K-1) vel_K |v-z| + 1e-10 (trace-derived, not a published constant); "
            f"D_star~D_K={D[K]:.12g}; a-priori bound {a_priori:.3e}"),
    )
    return TwoPointSeries(np.arange(K + 1), R, D, R_inner, t, sz.s, theta, vz,
                          eps, float(D[K]), a_priori, reports)


def check_stolz_cesaro(tp):
    """Weighted average A_K = (s_1 R_1 + sum t_i [D_i + theta (R_i - R_{i-1})]) / s_K.

    Two parts: the exact relation R_K = A_K + (theta (R_0 - R_1) - D_1)/s_K,
    and |A_K - D_K| <= eps_tail + |theta (R_0 - R_1) - D_1| / s_K.
    """
    th, R, D, t, s = tp.theta, tp.R, tp.D, tp.t, tp.s
    terms = t * (D[1:] + th * (R[1:] - R[:-1]))
    num = cumsum_compensated(terms, start=s[0] * R[1])
    A = num / s
    head = th * (R[0] - R[1]) - D[1]
    K = len(t)
    ks = np.arange(1, K + 1)
    scale = max(1.0, float(np.max(np.abs(R))), abs(head))
    ident = np.abs(R[1:] - (A + head / s)) / (scale * ks)
    ident_rep = CheckReport.from_violations(
        "stolz-identity", ident, ks, 1e-10, "|R_k - A_k - head/s_k| / (k scale)")
    tol = tp.eps_tail + abs(head) / s[-1]
    gap = abs(A[-1] - D[-1])
    tail_rep = CheckReport(
        "stolz-tail", gap <= tol, float(gap), K, float(tol),
        f"|A_K - D_K| vs eps_tail + |theta(R_0-R_1) - D_1|/s_K; A_K={A[-1]:.12g}")
    return ident_rep, tail_rep


# ----------------------------------------------------------- reporting

@dataclass
class SummabilityReport:
    """Partial sums of t_{k+1} gap_k and t_k vel_k^2 (informational only)."""

    ks: np.ndarray
    gap_sums: np.ndarray
    vel_sums: np.ndarray
    growth: list  # rows (k, gap_sum(2k)/gap_sum(k), vel_sum(2k)/vel_sum(k))

    def rows(self):
        return [(int(k), float(a), float(b)) for k, a, b in
                zip(self.ks, self.gap_sums, self.vel_sums)]


def summability_report(series, t_values):
    """Emit running sums of both series; nothing is asserted about them."""
    t_values = np.asarray(t_values, dtype=float)
    ks = series.ks
    ok = ks < len(t_values)  # t_{k+1} must exist
    ks = ks[ok]
    gap_terms = t_values[ks] * np.maximum(series.gap[ok], 0.0)
    vel_terms = series.t[ok] * series.vel[ok] ** 2
    P1 = cumsum_compensated(gap_terms)
    P2 = cumsum_compensated(vel_terms)
    growth = []
    pos = {int(k): j for j, k in enumerate(ks)}
    k = 1
    while 2 * k in pos:
        a, b = P1[pos[k]], P2[pos[k]]
        growth.append((k,
                       P1[pos[2 * k]] / a if a > 0 else math.nan,
                       P2[pos[2 * k]] / b if b > 0 else math.nan))
        k *= 2
    return SummabilityReport(ks, P1, P2, growth)


def convergence_probe(trace, problem, series=None, tail_tol=None, probe_const=10.0):
    """(cauchy report, distance report) for the last iterate.

    The Cauchy tolerance probe_const * C_z / t_{K/2} is a heuristic guard.
    The distance tolerance defaults to sqrt(2 E_1 / (lam mu)) / t_K when the
    problem has quadratic growth modulus mu and a closed-form projection;
    otherwise the distance is reported but not asserted unless ``tail_tol`` is given.
    """
    if series is None:
        series = lyapunov_series(trace, problem.known_minimizers[0])
    K = trace.last_k
    xK = trace.x(K)
    half_idx = int(np.searchsorted(trace.ks, K // 2, side="right")) - 1
    kh = int(trace.ks[max(half_idx, 0)])
    xh = trace.xs[max(half_idx, 0)]
    C = series.C_z
    th = trace.t(max(kh, 1))
    ctol = probe_const * C / th
    cdist = float(np.linalg.norm(xK - xh))
    note = "" if K >= 10_000 else f" (short run K={K})"
    cauchy = CheckReport("cauchy-tail", cdist <= ctol, cdist, K, ctol,
                         f"heuristic: ||x_K - x_{kh}|| vs {probe_const:g} C_z / t_{kh}{note}")
    proj = problem.project_argmin(xK)
    if proj is None:
        z = problem.known_minimizers[0]
        dist = float(np.linalg.norm(xK - z))
        asserted = tail_tol is not None
        tol = tail_tol if asserted else math.inf
        what = "distance to known minimizer (no closed-form projection)"
    else:
        dist = float(np.linalg.norm(xK - proj))
        asserted = True
        if tail_tol is not None:
            tol = float(tail_tol)
            what = "distance to minimizer set, fixed tolerance"
        elif problem.growth:
            tol = math.sqrt(2.0 * series.E1 / (series.lam * problem.growth)) / trace.t(K)
            what = "distance to minimizer set vs rate-derived sqrt(2 E_1/(lam mu))/t_K"
        else:
            tol, asserted = math.inf, False
            what = "distance to minimizer set (no tolerance available)"
    distance = CheckReport("argmin-distance", dist <= tol, dist, K, tol, what + note, asserted)
    return cauchy, distance


def reports_to_json(reports, **extra):
    return json.dumps({"reports": [r.to_dict() for r in reports], **extra}, indent=2)
