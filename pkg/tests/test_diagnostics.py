import json
import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from fistalyap import diagnostics as dg, problems as pb, solver
from fistalyap.checks import CheckReport
from fistalyap.solver import SolverConfig
from fistalyap.tseq import StepRule

NES = StepRule.nesterov()
CD3 = StepRule.chambolle_dossal(3)


def run(name, dim, rule, iters, x0=None, lam=None, seed=0, **kw):
    p = pb.catalog(name, dim, seed)
    x0 = np.ones(dim) if x0 is None else np.asarray(x0, float)
    return p, solver.run(p, SolverConfig(rule, iters, x0, lam=lam, **kw))


@pytest.fixture(scope="module")
def degenerate_cd3():
    p, tr = run("quadratic-degenerate", 2, CD3, 10_000, lam=1.0)
    return p, tr, dg.lyapunov_series(tr, p.known_minimizers[0])


@pytest.fixture(scope="module")
def curved():
    """A slower degenerate problem where every coordinate keeps moving."""
    A = np.diag([1.0, 0.3, 0.01, 0.0])
    p = pb.quadratic_problem("slow-degenerate", A, [np.zeros(4), np.array([0, 0, 0, 2.0])])
    tr = solver.run(p, SolverConfig(CD3, 3000, np.array([1.0, -2.0, 3.0, 1.0]), lam=0.7))
    return p, tr


# ------------------------------------------------------------ CheckReport

def test_check_report_pass_iff_within_tolerance():
    r = CheckReport.from_violations("x", [0.0, 2e-11, -5.0], [1, 2, 3], 1e-10)
    assert r.passed and r.worst_violation == 2e-11 and r.at_k == 2
    r = CheckReport.from_violations("x", [0.0, 2e-10], [1, 2], 1e-10)
    assert not r.passed and r.at_k == 2
    r = CheckReport.from_violations("x", [0.0, float("nan")], [1, 2], 1.0)
    assert not r.passed and r.at_k == 2
    assert type(r.passed) is bool
    json.dumps(r.to_dict())


@settings(max_examples=100)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=20), st.floats(0, 1))
def test_check_report_invariant(viol, tol):
    r = CheckReport.from_violations("p", viol, list(range(1, len(viol) + 1)), tol)
    assert r.passed == (r.worst_violation <= r.tolerance)


# ------------------------------------------------------- lyapunov_series

def test_first_record_equal_start():
    p, tr = run("least-squares", 3, NES, 50, seed=4)
    z = p.known_minimizers[0]
    r = dg.lyapunov_series(tr, z).record(1)
    x1 = tr.x(1)
    lam = tr.config.lam
    assert np.array_equal(r.z, x1) and r.vel == 0.0
    assert r.W == lam * r.gap
    assert r.E == pytest.approx(lam * r.gap + 0.5 * float((x1 - z) @ (x1 - z)), rel=1e-15)


def test_converged_run_has_zero_energies():
    p, tr = run("quadratic-spd", 1, NES, 20, x0=[2.0], lam=1.0)
    s = dg.lyapunov_series(tr, p.known_minimizers[0])
    later = s.ks >= 3
    assert np.all(s.W[later] == 0) and np.all(s.E[later] == 0) and np.all(s.h[later] == 0)


def test_energy_nonincreasing_on_degenerate():
    p, tr = run("quadratic-degenerate", 2, CD3, 1000, lam=1.0)
    W, E = dg.check_monotone(dg.lyapunov_series(tr, p.known_minimizers[0]))
    assert W.passed and E.passed
    assert E.worst_violation <= 1e-10 * dg.lyapunov_series(tr, p.known_minimizers[0]).E1


def test_series_requires_optimal_value():
    f = pb.Quadratic(np.eye(2))
    p = pb.CompositeProblem("no-fstar", f)
    tr = solver.run(p, SolverConfig(NES, 5, np.ones(2)))
    with pytest.raises(ValueError):
        dg.lyapunov_series(tr, np.zeros(2))


def test_table_rule_flags_theta(tmp_path):
    p = pb.catalog("quadratic-spd", 2)
    rule = StepRule.table([1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0])
    tr = solver.run(p, SolverConfig(rule, 5, np.ones(2)))
    s = dg.lyapunov_series(tr, np.zeros(2))
    assert s.theta_flagged and s.theta == 0.0
    assert "skipped" in dg.check_rate(s).details
    s4 = dg.lyapunov_series(solver.run(p, SolverConfig(StepRule.chambolle_dossal(4), 5, np.ones(2))),
                            np.zeros(2))
    assert s4.theta_flagged


def test_series_records_iterate():
    p, tr = run("huber", 3, CD3, 30, seed=2)
    s = dg.lyapunov_series(tr, p.known_minimizers[0])
    recs = list(s)
    assert [r.k for r in recs] == list(range(1, 32))
    for r in recs:
        assert r.E >= 0 and r.W >= 0 and r.h >= 0 and r.s > 0 and r.vel >= 0
        assert r.gap >= -1e-12


# ---------------------------------------------------------- monotone/rate

def test_monotone_constant_zero():
    p, tr = run("quadratic-spd", 1, NES, 10, x0=[0.0])
    W, E = dg.check_monotone(dg.lyapunov_series(tr, np.zeros(1)))
    assert W.passed and E.passed and W.worst_violation == 0 and E.worst_violation == 0


def test_monotone_detects_oversized_step():
    p = pb.catalog("quadratic-spd", 2)
    tr = solver.run(p, SolverConfig(NES, 200, np.ones(2), lam=2.0 / p.L), check_step=False)
    W, _ = dg.check_monotone(dg.lyapunov_series(tr, np.zeros(2)))
    assert not W.passed


def test_rate_least_squares_nesterov():
    p, tr = run("least-squares", 20, NES, 10_000, seed=0)
    s = dg.lyapunov_series(tr, p.known_minimizers[0])
    rep = dg.check_rate(s)
    assert rep.passed
    ratio = s.lam * s.gap * s.t ** 2 / s.E1
    assert np.max(ratio) <= 1 + 1e-10
    assert f"final ratio={ratio[-1]:.6g}" in rep.details


def test_rate_converged_passes():
    p, tr = run("quadratic-spd", 1, NES, 10, x0=[5.0], lam=1.0)
    assert dg.check_rate(dg.lyapunov_series(tr, np.zeros(1))).passed


# ------------------------------------------------------------- ergodic

def test_ergodic_first_step_identity():
    p, tr = run("lasso", 4, CD3, 1, seed=3, x0=[0.3, -1, 2, 0.5])
    th = 0.5
    t1 = tr.t(1)
    x0, x1 = tr.x(0), tr.x(1)
    u1 = t1 * (x1 - x0) + x0 + th * (x1 - x0)
    assert np.allclose(t1 * u1, (1 + th) * x1 - th * x0, rtol=0, atol=1e-15)
    rec, simplex = dg.ergodic_reconstruct(tr)
    assert rec.passed and simplex.passed


def test_ergodic_nesterov_uses_z(degenerate_cd3):
    p, tr = run("least-squares", 3, NES, 200, seed=1)
    s = dg.lyapunov_series(tr, p.known_minimizers[0])
    assert np.array_equal(s.u, s.z)
    assert all(r.passed for r in dg.ergodic_reconstruct(tr))


def test_ergodic_degenerate_1000():
    p, tr = run("quadratic-degenerate", 6, CD3, 1000, lam=0.5)
    rec, simplex = dg.ergodic_reconstruct(tr)
    assert rec.passed and simplex.passed
    assert rec.tolerance == 1e-8


def test_ergodic_rejects_thinned():
    p, tr = run("quadratic-spd", 2, NES, 50, record_every=5)
    with pytest.raises(ValueError):
        dg.ergodic_reconstruct(tr)


# ------------------------------------------------------------- bounds

def test_bound_constants_degenerate(degenerate_cd3):
    p, tr, s = degenerate_cd3
    assert s.W1 == 0.5 and s.E1 == 1.5
    assert s.C_z == pytest.approx(math.sqrt(3) + 0.5, rel=1e-15)
    assert s.C_z == pytest.approx(2.232, abs=1e-3)
    assert all(r.passed for r in dg.check_bounds(s))
    assert dg.check_scaled_velocity(s).passed


def test_bounds_on_curved(curved):
    p, tr = curved
    for z in p.known_minimizers:
        s = dg.lyapunov_series(tr, z)
        assert all(r.passed for r in dg.check_bounds(s))
        assert dg.check_scaled_velocity(s).passed
        assert dg.check_jensen(s, tr.x(0)).passed


def test_bounds_converged():
    p, tr = run("quadratic-spd", 1, NES, 10, x0=[0.0])
    s = dg.lyapunov_series(tr, np.zeros(1))
    assert all(r.passed and r.worst_violation == 0 for r in dg.check_bounds(s))


# ------------------------------------------------------------ identities

@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["quadratic-spd", "quadratic-degenerate", "least-squares", "lasso",
                        "logistic-l2", "huber"]),
       st.sampled_from([0.0, 0.2, 0.5, 0.8]),
       st.floats(0.3, 1.0),
       st.integers(0, 10_000))
def test_identities_hold_along_random_runs(name, theta, lam_frac, seed):
    p = pb.catalog(name, 3, seed % 5)
    x0 = np.array([(seed % 7) - 3.0, 1.0, -0.5])
    rule = StepRule.general_theta(theta)
    tr = solver.run(p, SolverConfig(rule, 400, x0, lam=lam_frac / p.L))
    s = dg.lyapunov_series(tr, p.known_minimizers[0])
    reports = [*dg.check_monotone(s), dg.check_rate(s), *dg.ergodic_reconstruct(tr),
               *dg.check_bounds(s), dg.check_scaled_velocity(s), dg.check_jensen(s, x0),
               dg.check_energy_identity(s), dg.check_z_representation(s),
               dg.check_s_identity(s), dg.check_ravine(s, tr)]
    bad = [r.line() for r in reports if not r.passed]
    assert not bad


def test_ravine_gap_decays(degenerate_cd3):
    p, tr, s = degenerate_cd3
    assert dg.check_ravine(s, tr, from_k=5000).passed
    gaps = [np.linalg.norm(y - tr.x(k)) for k, y in solver.ravine_points(tr) if k >= 5000]
    assert max(gaps) <= s.velocity_constant / tr.t(5000)


def test_s_discrepancy_stored(degenerate_cd3):
    _, _, s = degenerate_cd3
    assert 0.0 <= s.s_discrepancy <= 1e-12


# ----------------------------------------------------------- two points

def test_two_point_requires_distinct_minimizers(degenerate_cd3):
    p, tr, _ = degenerate_cd3
    with pytest.raises(ValueError):
        dg.two_point_series(tr, np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        dg.two_point_series(tr, np.zeros(2), np.array([1.0, 0.0]), problem=p)


def test_two_point_symmetric_start():
    p, tr = run("quadratic-degenerate", 2, CD3, 20, x0=[1.0, 0.5], lam=1.0)
    tp = dg.two_point_series(tr, *p.known_minimizers, problem=p)
    assert tp.R[1] == 0.0


def test_two_point_identities_and_tail(curved):
    p, tr = curved
    z, v = p.known_minimizers
    tp = dg.two_point_series(tr, z, v, problem=p)
    assert all(r.passed for r in tp.reports)
    K = len(tp.R) - 1
    assert abs(tp.R[K] - tp.D[K]) <= (tr.t(K) - 1) * tr.vel[K] * np.linalg.norm(v - z) + 1e-10
    assert tp.D_star == tp.D[K]
    assert abs(tp.D_star - tp.R_inner[K]) <= tp.eps_tail
    ident, tail = dg.check_stolz_cesaro(tp)
    assert ident.passed and tail.passed


def test_two_point_limit_when_iterates_reach_v():
    # start on the minimizer line at v: R_k stays at 1/2 ||v - z||^2
    p, tr = run("quadratic-degenerate", 2, NES, 50, x0=[0.0, 1.0])
    tp = dg.two_point_series(tr, *p.known_minimizers, problem=p)
    assert np.allclose(tp.R, 0.5)
    assert tp.D_star == pytest.approx(0.5, abs=1e-15)


# ------------------------------------------------------------ summability

def test_summability_converged_constant():
    p, tr = run("quadratic-spd", 1, NES, 30, x0=[4.0], lam=1.0)
    sr = dg.summability_report(dg.lyapunov_series(tr, np.zeros(1)), tr.t_values)
    assert np.all(sr.gap_sums[2:] == sr.gap_sums[2])
    assert np.all(sr.vel_sums[2:] == sr.vel_sums[2])


def test_summability_monotone_with_growth(curved):
    p, tr = curved
    sr = dg.summability_report(dg.lyapunov_series(tr, p.known_minimizers[0]), tr.t_values)
    assert np.all(np.diff(sr.gap_sums) >= 0) and np.all(np.diff(sr.vel_sums) >= 0)
    assert [g[0] for g in sr.growth] == [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024]
    assert all(g[1] >= 1 for g in sr.growth[1:])


# ----------------------------------------------------------- convergence

def test_convergence_probe_finite_convergence():
    p, tr = run("quadratic-spd", 1, NES, 20, x0=[3.0], lam=1.0)
    cauchy, dist = dg.convergence_probe(tr, p)
    assert cauchy.passed and dist.passed and dist.worst_violation == 0.0


def test_convergence_probe_degenerate(degenerate_cd3):
    p, tr, s = degenerate_cd3
    cauchy, dist = dg.convergence_probe(tr, p, s, tail_tol=1e-4)
    assert cauchy.passed and dist.passed
    assert "heuristic" in cauchy.details


def test_convergence_probe_unprojectable_not_asserted():
    p, tr = run("huber", 3, NES, 200, seed=1)
    _, dist = dg.convergence_probe(tr, p)
    assert not dist.asserted


def test_reports_to_json_round_trip(degenerate_cd3):
    _, _, s = degenerate_cd3
    text = dg.reports_to_json(dg.check_bounds(s), note="x")
    d = json.loads(text)
    assert d["note"] == "x" and len(d["reports"]) == 3
