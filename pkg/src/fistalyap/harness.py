"""Experiment runner: config parsing, solver + diagnostics pipeline, outputs.

Config files are flat ``key = value`` text (``#`` starts a comment)::

    problem = quadratic-degenerate
    dim = 2
    seed = 0
    rule = chambolle-dossal:3
    lambda = auto
    iterations = 100000
    x0 = ones
    checks = all
    output_dir = runs/degenerate

Exit codes: 0 all asserted checks pass, 1 a check failed, 2 invalid
config, 3 I/O error.
"""

from dataclasses import asdict, dataclass, field
import json
import logging
import math
import os
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import io as tio
from . import problems, solver, tseq
from .rng import SplitMix64

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "FISTALYAP_OUTPUT_ROOT"

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

# Frozen expansion of "checks = all"; extend only by adding a new name here
# together with a version note in the README.
ALL_CHECKS = (
    "admissible",
    "monotone",
    "rate",
    "ergodic",
    "bounds",
    "scaled-velocity",
    "jensen",
    "energy-identity",
    "z-representation",
    "s-identity",
    "ravine",
    "two-point",
    "stolz-cesaro",
    "convergence",
    "summability",
)
THETA_CHECKS = {"ergodic", "bounds", "scaled-velocity", "jensen", "s-identity", "stolz-cesaro"}
UNTHINNED_CHECKS = {"ergodic", "two-point", "stolz-cesaro"}
TWO_POINT_CHECKS = {"two-point", "stolz-cesaro"}

KEYS = ("problem", "dim", "seed", "problem_file", "rule", "lambda", "iterations",
        "x0", "x1", "checks", "output_dir", "record_every")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    problem: str = "quadratic-spd"
    dim: int = 2
    seed: int = 0
    problem_file: str | None = None
    rule: str = "nesterov"
    lam: str = "auto"
    iterations: int = 1000
    x0: str = "ones"
    x1: str | None = None
    checks: tuple = ("monotone", "rate")
    output_dir: str | None = None
    record_every: int = 1
    base_dir: str = "."

    def echo(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["checks"] = list(self.checks)
        d.pop("base_dir")
        return d


def parse_config_text(text):
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value, got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_config(values, base_dir="."):
    """ExperimentConfig from a mapping of raw string values."""
    cfg = ExperimentConfig(base_dir=str(base_dir))
    for key, value in values.items():
        key = key.replace("-", "_")
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        value = str(value).strip()
        try:
            if key in ("dim", "seed", "iterations", "record_every"):
                setattr(cfg, key, int(value))
            elif key == "lambda":
                cfg.lam = value
            elif key == "checks":
                names = [c.strip() for c in value.replace(";", ",").split(",") if c.strip()]
                cfg.checks = ALL_CHECKS if names == ["all"] else tuple(names)
            elif key in ("problem_file", "x1", "output_dir"):
                setattr(cfg, key, value or None)
            else:
                setattr(cfg, key, value)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return cfg


def load_config(path, overrides=None):
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    values = parse_config_text(text)
    values.update(overrides or {})
    return build_config(values, base_dir=path.parent)


def _resolve_path(cfg, p):
    p = Path(p)
    return p if p.is_absolute() else Path(cfg.base_dir) / p


def _start_vector(cfg, spec, dim):
    spec = spec.strip()
    if spec == "zeros":
        return np.zeros(dim)
    if spec == "ones":
        return np.ones(dim)
    if spec.startswith("random"):
        _, _, s = spec.partition(":")
        seed = int(s) if s else cfg.seed
        return SplitMix64(seed).uniform(-1.0, 1.0, size=dim)
    path = _resolve_path(cfg, spec)
    if not path.exists():
        raise ConfigError(f"start vector file {path} not found")
    vec = np.array([float(v) for v in path.read_text().split()])
    if vec.size != dim:
        raise ConfigError(f"{path}: {vec.size} values, problem dimension is {dim}")
    return vec


@dataclass
class Prepared:
    config: ExperimentConfig
    problem: problems.CompositeProblem
    rule: tseq.StepRule
    solver_config: solver.SolverConfig


def prepare(cfg):
    """Validate a config and build the problem and solver config; raises ConfigError."""
    if cfg.iterations < 2:
        raise ConfigError("iterations must be >= 2")
    if cfg.record_every < 1:
        raise ConfigError("record_every must be >= 1")
    unknown = [c for c in cfg.checks if c not in ALL_CHECKS]
    if unknown:
        raise ConfigError(f"unknown checks: {', '.join(unknown)}")
    try:
        if cfg.problem_file:
            path = _resolve_path(cfg, cfg.problem_file)
            if not path.exists():
                raise ConfigError(f"problem file {path} not found")
            problem = problems.load_problem(path)
        else:
            problem = problems.catalog(cfg.problem, cfg.dim, cfg.seed)
    except (ValueError, RuntimeError) as exc:
        raise ConfigError(str(exc)) from None
    try:
        rule = tseq.parse_rule(cfg.rule, base_dir=cfg.base_dir)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"rule: {exc}") from None
    if rule.kind == tseq.TABLE and len(rule.values) < cfg.iterations + 2:
        raise ConfigError(f"table rule needs {cfg.iterations + 2} values, has {len(rule.values)}")
    if cfg.lam == "auto":
        lam = 1.0 / problem.L
    else:
        try:
            lam = float(cfg.lam)
        except ValueError:
            raise ConfigError(f"lambda must be a number or 'auto', got {cfg.lam!r}") from None
    x0 = _start_vector(cfg, cfg.x0, problem.dim)
    x1 = None if cfg.x1 is None else _start_vector(cfg, cfg.x1, problem.dim)
    if cfg.record_every > 1:
        bad = UNTHINNED_CHECKS & set(cfg.checks)
        if bad and cfg.checks != ALL_CHECKS:
            raise ConfigError(f"checks {sorted(bad)} need record_every = 1")
    scfg = solver.SolverConfig(rule, cfg.iterations, x0, x1, lam, cfg.record_every)
    try:
        scfg = scfg.resolved(problem)
    except solver.ConfigError as exc:
        raise ConfigError(str(exc)) from None
    return Prepared(cfg, problem, rule, scfg)


@dataclass
class RunSummary:
    config: dict
    problem: str
    rule: str
    final_gap: float | None
    final_velocity: float
    reports: list
    skipped: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    exit_status: int = EXIT_OK
    files: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r.passed for r in self.reports if r.asserted)

    def to_dict(self):
        return {
            "config": self.config,
            "problem": self.problem,
            "rule": self.rule,
            "final_gap": self.final_gap,
            "final_velocity": self.final_velocity,
            "exit_status": self.exit_status,
            "passed": self.passed,
            "reports": [r.to_dict() for r in self.reports],
            "skipped": self.skipped,
            "info": self.info,
            "files": self.files,
        }


def output_dir_for(cfg):
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "."))
    if cfg.output_dir:
        p = Path(cfg.output_dir)
        return p if p.is_absolute() else root / p
    safe = cfg.rule.replace(":", "_").replace("/", "_")
    return root / f"{cfg.problem}-d{cfg.dim}-s{cfg.seed}-{safe}-n{cfg.iterations}"


def run_checks(prep, trace):
    """Run the requested diagnostics; returns (reports, skipped, info, series, two_point)."""
    cfg, problem, rule = prep.config, prep.problem, prep.rule
    checks = list(cfg.checks)
    reports, skipped, info = [], {}, {}
    theta_known = rule.theta is not None
    mins = problem.known_minimizers
    series = dg.lyapunov_series(trace, mins[0]) if mins else None
    tp = None

    for name in checks:
        if name in THETA_CHECKS and not theta_known:
            skipped[name] = "rule has no theta"
            continue
        if name in UNTHINNED_CHECKS and trace.thinned:
            skipped[name] = "trace is thinned"
            continue
        if name in TWO_POINT_CHECKS and len(mins) < 2:
            skipped[name] = "problem exposes fewer than two minimizers"
            continue
        if name == "admissible":
            reports.append(tseq.validate_admissible(trace.t_values))
        elif series is None:
            skipped[name] = "problem has no known minimizer"
        elif name == "monotone":
            reports.extend(dg.check_monotone(series))
        elif name == "rate":
            reports.append(dg.check_rate(series))
        elif name == "ergodic":
            reports.extend(dg.ergodic_reconstruct(trace))
        elif name == "bounds":
            reports.extend(dg.check_bounds(series))
        elif name == "scaled-velocity":
            reports.append(dg.check_scaled_velocity(series))
        elif name == "jensen":
            reports.append(dg.check_jensen(series, trace.xs[0]))
        elif name == "energy-identity":
            reports.append(dg.check_energy_identity(series))
        elif name == "z-representation":
            reports.append(dg.check_z_representation(series))
        elif name == "s-identity":
            reports.append(dg.check_s_identity(series))
        elif name == "ravine":
            reports.append(dg.check_ravine(series, trace))
        elif name in ("two-point", "stolz-cesaro"):
            if tp is None:
                tp = dg.two_point_series(trace, mins[0], mins[1], problem=problem)
                info["D_star"] = tp.D_star
                info["eps_tail"] = tp.eps_tail
            reports.extend(tp.reports if name == "two-point" else dg.check_stolz_cesaro(tp))
        elif name == "convergence":
            reports.extend(dg.convergence_probe(trace, problem, series))
        elif name == "summability":
            sr = dg.summability_report(series, trace.t_values)
            info["summability"] = {
                "final_gap_sum": float(sr.gap_sums[-1]) if len(sr.ks) else None,
                "final_vel_sum": float(sr.vel_sums[-1]) if len(sr.ks) else None,
                "growth": [list(g) for g in sr.growth],
            }
            info["_summability"] = sr
    return reports, skipped, info, series, tp


def run_experiment(cfg, write=True):
    """Run solver + diagnostics for one config; returns a RunSummary.

    Raises ConfigError for invalid configs and OSError for I/O failures.
    """
    prep = prepare(cfg)
    trace = solver.run(prep.problem, prep.solver_config)
    reports, skipped, info, series, tp = run_checks(prep, trace)
    sr = info.pop("_summability", None)
    K = trace.last_k
    summary = RunSummary(
        config=cfg.echo(),
        problem=prep.problem.name,
        rule=prep.rule.spec(),
        final_gap=None if trace.gaps is None else float(trace.gaps[K]),
        final_velocity=float(trace.vel[K]),
        reports=reports,
        skipped=skipped,
        info={**info, "lambda": prep.solver_config.lam, "L": prep.problem.L,
              "t_K": trace.t(K), "iterations": K - 1, "wall_time": trace.wall_time},
    )
    summary.exit_status = EXIT_OK if summary.passed else EXIT_CHECK_FAILED
    if write:
        out = output_dir_for(cfg)
        out.mkdir(parents=True, exist_ok=True)
        tio.write_trace_csv(out / "trace.csv", trace)
        summary.files["trace"] = str(out / "trace.csv")
        if series is not None:
            tio.write_series_csv(out / "diagnostics.csv", series, tp)
            summary.files["diagnostics"] = str(out / "diagnostics.csv")
        if sr is not None:
            tio.write_csv(out / "summability.csv", ["k", "gap_sum", "vel_sum"], sr.rows())
            summary.files["summability"] = str(out / "summability.csv")
        summary.files["summary"] = str(out / "summary.json")
        (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2, default=_json_default) + "\n")
    return summary


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    raise TypeError(f"not serializable: {type(o).__name__}")


@dataclass
class Comparison:
    header: list
    rows: list
    series_header: list
    series_rows: list


def compare_rules(configs, write_to=None):
    """Run the same problem under several rules and tabulate the results.

    Summary columns: rule, theta, final_gap, t_K, final_ratio (gap t_K^2),
    max_ratio, E_1.  The per-iteration table has t and gap*t^2 per rule.
    """
    if not configs:
        raise ConfigError("no configs to compare")
    keys = {(c.problem, c.dim, c.seed, c.problem_file) if not c.problem_file
            else (None, None, None, str(_resolve_path(c, c.problem_file).resolve()))
            for c in configs}
    if len(keys) != 1:
        raise ConfigError("compare_rules needs the same problem in every config")
    header = ["rule", "theta", "iterations", "final_gap", "t_K", "final_ratio", "max_ratio", "E_1"]
    rows, cols, names = [], [], []
    for cfg in configs:
        prep = prepare(cfg)
        trace = solver.run(prep.problem, prep.solver_config)
        K = trace.last_k
        t = trace.t_values
        gaps = trace.gaps[1:] if trace.gaps is not None else np.full(K, math.nan)
        ratio = gaps * t * t
        e1 = math.nan
        if prep.problem.known_minimizers:
            e1 = dg.lyapunov_series(trace, prep.problem.known_minimizers[0]).E1
        th = prep.rule.theta
        rows.append([prep.rule.spec(), "" if th is None else th, K - 1, gaps[-1], t[-1],
                     ratio[-1], float(np.nanmax(ratio)), e1])
        cols.append((t, ratio))
        names.append(prep.rule.spec())
    n = min(len(c[0]) for c in cols)
    series_header = ["k"] + [f"t[{nm}]" for nm in names] + [f"ratio[{nm}]" for nm in names]
    series_rows = [[k + 1] + [c[0][k] for c in cols] + [c[1][k] for c in cols] for k in range(n)]
    cmp = Comparison(header, rows, series_header, series_rows)
    if write_to is not None:
        out = Path(write_to)
        out.mkdir(parents=True, exist_ok=True)
        tio.write_csv(out / "comparison.csv", header, rows)
        tio.write_csv(out / "comparison_series.csv", series_header, series_rows)
    return cmp
