"""Accelerated (proximal) gradient iteration with a full trace.

For k >= 1::

    y_k     = x_k + alpha_k (x_k - x_{k-1}),   alpha_k = (t_k - 1) / t_{k+1}
    x_{k+1} = prox_{lam g}(y_k - lam grad f(y_k))
"""

from dataclasses import dataclass, field
import time

import numpy as np

from . import tseq


class SolverError(RuntimeError):
    """Non-finite iterate produced during a run."""

    def __init__(self, k, what, norm):
        super().__init__(f"iteration {k}: non-finite {what} (norm={norm})")
        self.k = k
        self.norm = norm


class ConfigError(ValueError):
    pass


@dataclass
class SolverConfig:
    rule: tseq.StepRule
    max_iter: int
    x0: np.ndarray
    x1: np.ndarray | None = None
    lam: float | None = None  # None means 1/L
    record_every: int = 1
    grad_tol: float | None = None  # optional early exit on ||grad f(y_k)||

    def resolved(self, problem, check_step=True):
        """Validate against ``problem`` and fill defaults (x1 = x0, lam = 1/L)."""
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        x1 = x0.copy() if self.x1 is None else np.array(self.x1, dtype=float).reshape(-1)
        for nm, v in (("x0", x0), ("x1", x1)):
            if v.shape != (problem.dim,):
                raise ConfigError(f"{nm} has dimension {v.size}, problem has {problem.dim}")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        lam = 1.0 / problem.L if self.lam is None else float(self.lam)
        if not lam > 0:
            raise ConfigError(f"step size must be positive, got {lam}")
        if check_step and lam > 1.0 / problem.L:
            raise ConfigError(f"step size {lam} exceeds 1/L = {1.0 / problem.L}")
        return SolverConfig(self.rule, int(self.max_iter), x0, x1, lam,
                            int(self.record_every), self.grad_tol)


@dataclass
class IterateState:
    k: int
    x_prev: np.ndarray
    x: np.ndarray
    t: float
    t_next: float
    y: np.ndarray | None = None  # y_{k-1}, the point that produced x

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.t < 1.0:
            raise ValueError(f"t_k must be >= 1, got {self.t}")


def initial_state(config):
    t2 = tseq.next_t(config.rule, 1.0, 1)
    return IterateState(1, np.asarray(config.x0, float), np.asarray(config.x1, float), 1.0, t2)


def step(state, problem, config, t_after=None):
    """One iteration: returns the state at k+1.

    ``t_after`` is t_{k+2}; computed with ``tseq.next_t`` when omitted.
    """
    a = tseq.alpha_k(state.t, state.t_next)
    y = state.x + a * (state.x - state.x_prev)
    g = problem.gradient(y)
    if not np.all(np.isfinite(g)):
        raise SolverError(state.k, "gradient", float(np.linalg.norm(g)))
    x_new = y - config.lam * g
    if problem.nonsmooth is not None:
        x_new = problem.prox(config.lam, x_new)
    if not np.all(np.isfinite(x_new)):
        raise SolverError(state.k, "iterate", float(np.linalg.norm(x_new)))
    if t_after is None:
        t_after = tseq.next_t(config.rule, state.t_next, state.k + 1)
    return IterateState(state.k + 1, state.x, x_new, state.t_next, t_after, y)


@dataclass
class SolverTrace:
    """Iterate history of one run.

    ``xs[j]`` is x at index ``ks[j]``; ``ys[j]`` is y at index ``y_ks[j]``.
    ``t_values[k-1]`` is t_k for k = 1..N+1.  ``objective``, ``gaps`` and
    ``vel`` are kept for every index even when the stored iterates are thinned
    (``objective[k]`` for k = 0..N+1, ``vel[k]`` = ||x_k - x_{k-1}|| with
    ``vel[0]`` = nan).
    """

    config: SolverConfig
    problem_name: str
    ks: np.ndarray
    xs: np.ndarray
    y_ks: np.ndarray
    ys: np.ndarray
    t_values: np.ndarray
    objective: np.ndarray
    gaps: np.ndarray | None
    vel: np.ndarray
    grad_norms: np.ndarray
    wall_time: float = 0.0
    grad_evals: int = 0
    stopped_early: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def last_k(self):
        return int(self.ks[-1])

    @property
    def thinned(self):
        return len(self.ks) != self.last_k + 1

    def x(self, k):
        j = np.searchsorted(self.ks, k)
        if j >= len(self.ks) or self.ks[j] != k:
            raise KeyError(f"x_{k} not recorded")
        return self.xs[j]

    def t(self, k):
        return float(self.t_values[k - 1])


def run(problem, config, check_step=True):
    """Execute ``config.max_iter`` iterations from (x_0, x_1).

    Set ``check_step=False`` only in tests that deliberately break the
    step-size contract.
    """
    cfg = config.resolved(problem, check_step=check_step)
    N = cfg.max_iter
    prefix = tseq.generate(cfg.rule, N + 2)
    tv = prefix.values
    every = cfg.record_every

    def keep(k):
        return every == 1 or k <= 1 or k % every in (0, 1 % every) or k == N + 1 or k == N

    ks, xs, y_ks, ys = [0, 1], [cfg.x0.copy(), cfg.x1.copy()], [], []
    obj = np.full(N + 2, np.nan)
    gaps = np.full(N + 2, np.nan) if problem.known_minimizers or problem.optimal_value is not None else None
    vel = np.full(N + 2, np.nan)
    gnorm = np.full(N + 1, np.nan)
    for k, xk in ((0, cfg.x0), (1, cfg.x1)):
        obj[k] = problem.objective(xk)
        if gaps is not None:
            gaps[k] = problem.gap(xk)
    vel[1] = float(np.linalg.norm(cfg.x1 - cfg.x0))

    state = IterateState(1, cfg.x0, cfg.x1, float(tv[0]), float(tv[1]))
    grad_evals = 0
    stopped = False
    started = time.perf_counter()
    for k in range(1, N + 1):
        state = step(state, problem, cfg, t_after=float(tv[k + 1]))
        grad_evals += 1
        kn = state.k
        x_new = state.x
        obj[kn] = problem.objective(x_new)
        if gaps is not None:
            gaps[kn] = problem.gap(x_new)
        vel[kn] = float(np.linalg.norm(x_new - state.x_prev))
        if every == 1 or keep(k):
            y_ks.append(k)
            ys.append(state.y)
        if keep(kn):
            ks.append(kn)
            xs.append(x_new)
        if cfg.grad_tol is not None:
            gnorm[k] = float(np.linalg.norm(problem.gradient(state.y)))
            if gnorm[k] <= cfg.grad_tol:
                stopped = True
                break
    wall = time.perf_counter() - started
    last = ks[-1]
    dim = problem.dim
    return SolverTrace(
        config=cfg,
        problem_name=problem.name,
        ks=np.array(ks, dtype=int),
        xs=np.array(xs).reshape(len(xs), dim),
        y_ks=np.array(y_ks, dtype=int),
        ys=np.array(ys).reshape(len(ys), dim),
        t_values=np.array(tv[: last], dtype=float),
        objective=obj[: last + 1],
        gaps=None if gaps is None else gaps[: last + 1],
        vel=vel[: last + 1],
        grad_norms=gnorm[: last],
        wall_time=wall,
        grad_evals=grad_evals,
        stopped_early=stopped,
        meta={"params": dict(problem.params)},
    )


def ravine_points(trace):
    """The extrapolated sequence as (k, y_k) pairs."""
    if len(trace.y_ks) == 0:
        raise ValueError("trace has no y-values")
    return list(zip(trace.y_ks.tolist(), trace.ys))
