"""Composite objectives f + g and a catalog of seeded test problems.

Every catalog problem carries its exact smoothness constant, optimal value
and at least one exact minimizer.  ``CompositeProblem.gap`` evaluates
F(x) - F(z) through a Bregman decomposition anchored at a known minimizer z,
which keeps the gap accurate to a relative (not absolute) precision as the
iterates approach the solution set.
"""

from dataclasses import dataclass, field
import math
from pathlib import Path

import numpy as np

from .rng import SplitMix64

CATALOG_NAMES = (
    "quadratic-spd",
    "quadratic-degenerate",
    "least-squares",
    "lasso",
    "logistic-l2",
    "huber",
)

HEADER_TAG = "fistalyap-problem"


# ---------------------------------------------------------------- smooth parts

class SmoothObjective:
    """Convex, L-smooth function on R^dim."""

    dim: int
    L: float

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def bregman(self, x, z):
        """f(x) - f(z) - <grad f(z), x - z>."""
        return self.value(x) - self.value(z) - float(np.dot(self.gradient(z), x - z))


class Quadratic(SmoothObjective):
    """f(x) = 1/2 (x - c)^T A (x - c) with A symmetric PSD."""

    def __init__(self, A, center=None):
        self.A = np.asarray(A, dtype=float)
        self.dim = self.A.shape[0]
        self.center = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        eig, vec = np.linalg.eigh(self.A)
        self.L = float(eig[-1])
        tol = 1e-12 * max(1.0, self.L)
        self._range_basis = vec[:, eig > tol]
        pos = eig[eig > tol]
        self.growth = float(pos[0]) if pos.size else 0.0

    def value(self, x):
        d = x - self.center
        return 0.5 * float(d @ (self.A @ d))

    def gradient(self, x):
        return self.A @ (x - self.center)

    def bregman(self, x, z):
        d = x - z
        return 0.5 * float(d @ (self.A @ d))

    def project_argmin(self, x):
        """Closed-form projection onto the affine minimizer set c + ker A."""
        d = x - self.center
        U = self._range_basis
        return self.center + d - U @ (U.T @ d)


class LeastSquares(SmoothObjective):
    """f(x) = 1/2 ||M x - y||^2."""

    def __init__(self, M, y):
        self.M = np.asarray(M, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.dim = self.M.shape[1]
        self.L = float(np.linalg.eigvalsh(self.M.T @ self.M)[-1])

    def value(self, x):
        r = self.M @ x - self.y
        return 0.5 * float(r @ r)

    def gradient(self, x):
        return self.M.T @ (self.M @ x - self.y)

    def bregman(self, x, z):
        r = self.M @ (x - z)
        return 0.5 * float(r @ r)


def _sigmoid(q):
    e = np.exp(-np.abs(q))
    return np.where(q >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _log1p_minus_id(u):
    # log1p(u) - u without cancellation for small |u|
    u = np.asarray(u, dtype=float)
    out = np.log1p(u) - u
    small = np.abs(u) < 1e-2
    if np.any(small):
        us = u[small]
        acc = np.zeros_like(us)
        p = us * us
        for n in range(2, 12):
            acc += (-1) ** (n + 1) * p / n
            p = p * us
        out[small] = acc
    return out


def _expm1_plus_id(d):
    # expm1(-d) + d without cancellation for small |d|
    d = np.asarray(d, dtype=float)
    out = np.expm1(-d) + d
    small = np.abs(d) < 1e-2
    if np.any(small):
        ds = -d[small]
        acc = np.zeros_like(ds)
        p = ds * ds
        fact = 2.0
        for n in range(2, 12):
            acc += p / fact
            p = p * ds
            fact *= n + 1
        out[small] = acc
    return out


class Logistic(SmoothObjective):
    """Mean logistic loss plus ridge: mean log(1 + exp(-b_i a_i.x)) + ridge/2 ||x||^2."""

    def __init__(self, M, labels, ridge=1e-3):
        self.M = np.asarray(M, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        self.ridge = float(ridge)
        self.m, self.dim = self.M.shape
        self._B = self.labels[:, None] * self.M
        self.L = float(np.linalg.eigvalsh(self.M.T @ self.M)[-1]) / (4.0 * self.m) + self.ridge

    def value(self, x):
        margins = self._B @ x
        return float(np.mean(np.logaddexp(0.0, -margins))) + 0.5 * self.ridge * float(x @ x)

    def gradient(self, x):
        w = _sigmoid(-(self._B @ x))
        return -(self._B.T @ w) / self.m + self.ridge * x

    def hessian(self, x):
        p = _sigmoid(self._B @ x)
        return (self.M.T * (p * (1.0 - p))) @ self.M / self.m + self.ridge * np.eye(self.dim)

    def bregman(self, x, z):
        q = self._B @ z
        d = self._B @ (x - z)
        w = _sigmoid(-q)
        u = w * np.expm1(-d)
        per = _log1p_minus_id(u) + w * _expm1_plus_id(d)
        diff = x - z
        return float(np.mean(per)) + 0.5 * self.ridge * float(diff @ diff)


class Huber(SmoothObjective):
    """Mean Huber loss of the residual M x - y with threshold delta."""

    def __init__(self, M, y, delta=1.0):
        self.M = np.asarray(M, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.delta = float(delta)
        self.m, self.dim = self.M.shape
        self.L = float(np.linalg.eigvalsh(self.M.T @ self.M)[-1]) / self.m

    def _h(self, r):
        a = np.abs(r)
        return np.where(a <= self.delta, 0.5 * r * r, self.delta * (a - 0.5 * self.delta))

    def value(self, x):
        return float(np.mean(self._h(self.M @ x - self.y)))

    def gradient(self, x):
        r = self.M @ x - self.y
        return self.M.T @ np.clip(r, -self.delta, self.delta) / self.m

    def bregman(self, x, z):
        dl = self.delta
        q = self.M @ z - self.y
        r = self.M @ x - self.y
        d = self.M @ (x - z)
        inner = np.abs(q) <= dl
        sq = np.sign(q)
        b = np.where(
            inner,
            np.where(np.abs(r) <= dl, 0.5 * d * d, 0.5 * d * d - 0.5 * (np.abs(r) - dl) ** 2),
            np.where(np.abs(r) <= dl, 0.5 * (r - dl * sq) ** 2,
                     np.where(np.sign(r) == sq, 0.0, 2.0 * dl * np.abs(r))),
        )
        return float(np.mean(b))


class Affine(SmoothObjective):
    """f(x) = <c, x>.  Has no minimizer; only useful for gradient checks."""

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)
        self.dim = self.c.size
        self.L = 1.0  # gradient is constant, any positive constant is valid

    def value(self, x):
        return float(self.c @ x)

    def gradient(self, x):
        return self.c.copy()

    def bregman(self, x, z):
        return 0.0


# ------------------------------------------------------------- nonsmooth parts

def soft_threshold(y, tau):
    """Coordinatewise sign(y) * max(|y| - tau, 0)."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.maximum(np.abs(y) - tau, 0.0)


class L1Norm:
    """g(x) = tau ||x||_1."""

    def __init__(self, tau):
        if tau < 0:
            raise ValueError("tau must be >= 0")
        self.tau = float(tau)

    def value(self, x):
        return self.tau * float(np.sum(np.abs(x)))

    def prox(self, lam, y):
        return soft_threshold(y, lam * self.tau)

    def linearized_excess(self, x, z, grad_z):
        """<grad_z, x - z> + g(x) - g(z), arranged to avoid cancellation."""
        s = np.sign(z)
        on = s != 0
        tau = self.tau
        out = np.where(
            on,
            (grad_z + tau * s) * (x - z) + tau * (np.abs(x) - s * x),
            grad_z * x + tau * np.abs(x),
        )
        return float(np.sum(out))


class BoxIndicator:
    """Indicator of the box lo <= x <= hi."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if np.any(self.lo > self.hi):
            raise ValueError("empty box")

    def value(self, x):
        return 0.0 if np.all((x >= self.lo) & (x <= self.hi)) else math.inf

    def prox(self, lam, y):
        return np.clip(y, self.lo, self.hi)

    def linearized_excess(self, x, z, grad_z):
        if not np.all((x >= self.lo) & (x <= self.hi)):
            return math.inf
        return float(np.dot(grad_z, x - z))


# -------------------------------------------------------------------- problems

@dataclass
class CompositeProblem:
    """min f(x) + g(x); ``nonsmooth`` is None for the purely smooth setting."""

    name: str
    smooth: SmoothObjective
    nonsmooth: object = None
    optimal_value: float | None = None
    known_minimizers: list = field(default_factory=list)
    growth: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.known_minimizers = [np.asarray(z, dtype=float) for z in self.known_minimizers]
        for z in self.known_minimizers:
            if z.shape != (self.dim,):
                raise ValueError(f"minimizer shape {z.shape} does not match dim {self.dim}")
        self._anchor = None
        if self.known_minimizers:
            z = self.known_minimizers[0]
            self._anchor = (z, self.smooth.gradient(z))

    @property
    def dim(self):
        return self.smooth.dim

    @property
    def L(self):
        return self.smooth.L

    def gradient(self, x):
        return self.smooth.gradient(x)

    def prox(self, lam, y):
        return y if self.nonsmooth is None else self.nonsmooth.prox(lam, y)

    def objective(self, x):
        val = self.smooth.value(x)
        if self.nonsmooth is not None:
            val += self.nonsmooth.value(x)
        return val

    def gap(self, x):
        """F(x) - F_star; uses the Bregman form when a minimizer is known."""
        if self._anchor is None:
            if self.optimal_value is None:
                raise ValueError(f"{self.name}: optimal value unknown")
            return self.objective(x) - self.optimal_value
        z, gz = self._anchor
        lin = (float(np.dot(gz, x - z)) if self.nonsmooth is None
               else self.nonsmooth.linearized_excess(x, z, gz))
        return self.smooth.bregman(x, z) + lin

    def project_argmin(self, x):
        """Closed-form projection onto the minimizer set, when available."""
        if isinstance(self.smooth, Quadratic) and self.nonsmooth is None:
            return self.smooth.project_argmin(x)
        if len(self.known_minimizers) == 1 and self.growth:
            # strongly convex around the unique minimizer
            return self.known_minimizers[0].copy()
        return None


def grad_check(obj, x, h=1e-5):
    """Max coordinate error of central differences vs. the gradient.

    Normalized by max(1, ||grad f(x)||).
    """
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    g = obj.gradient(x)
    err = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fd = (obj.value(x + e) - obj.value(x - e)) / (2.0 * h)
        err = max(err, abs(fd - g[i]))
    return err / max(1.0, float(np.linalg.norm(g)))


# -------------------------------------------------------------------- builders

def quadratic_problem(name, A, minimizers, growth=None, params=None):
    q = Quadratic(A)
    return CompositeProblem(name, q, None, 0.0, list(minimizers),
                            q.growth if growth is None else growth, params or {})


def least_squares_problem(M, y, params=None):
    f = LeastSquares(M, y)
    z = np.linalg.lstsq(f.M, f.y, rcond=None)[0]
    # one refinement step on the normal equations
    z = z - np.linalg.solve(f.M.T @ f.M, f.gradient(z))
    growth = float(np.linalg.eigvalsh(f.M.T @ f.M)[0])
    return CompositeProblem("least-squares", f, None, f.value(z), [z], growth, params or {})


def _lasso_solution(f, tau, max_rounds=50):
    """Exact lasso minimizer: prox-gradient to find the support, then solve KKT."""
    lam = 1.0 / f.L
    x = np.zeros(f.dim)
    G = f.M.T @ f.M
    Mty = f.M.T @ f.y
    for _ in range(max_rounds):
        for _ in range(2000):
            x = soft_threshold(x - lam * (G @ x - Mty), lam * tau)
        S = np.flatnonzero(x != 0)
        s = np.sign(x[S])
        z = np.zeros(f.dim)
        if S.size:
            z[S] = np.linalg.solve(G[np.ix_(S, S)], Mty[S] - tau * s)
        g = G @ z - Mty
        off = np.setdiff1d(np.arange(f.dim), S)
        if np.all(np.sign(z[S]) == s) and np.all(np.abs(g[off]) <= tau * (1 - 1e-12)):
            return z
    raise RuntimeError("lasso support identification did not settle")


def lasso_problem(M, y, tau, params=None):
    f = LeastSquares(M, y)
    g = L1Norm(tau)
    z = _lasso_solution(f, g.tau)
    return CompositeProblem("lasso", f, g, f.value(z) + g.value(z), [z], None, params or {})


def _newton_logistic(f, tol=1e-15, max_iter=100):
    x = np.zeros(f.dim)
    for _ in range(max_iter):
        g = f.gradient(x)
        if np.linalg.norm(g) <= tol:
            break
        step = np.linalg.solve(f.hessian(x), g)
        fx, a = f.value(x), 1.0
        while f.value(x - a * step) > fx - 0.25 * a * float(g @ step) and a > 1e-12:
            a *= 0.5
        x_new = x - a * step
        if np.array_equal(x_new, x):
            break
        x = x_new
    return x


def logistic_problem(M, labels, ridge=1e-3, params=None):
    f = Logistic(M, labels, ridge)
    z = _newton_logistic(f)
    return CompositeProblem("logistic-l2", f, None, f.value(z), [z], f.ridge, params or {})


def _huber_solution(f, max_iter=200):
    """Semismooth Newton with an exact solve once the residual pattern settles."""
    M, y, dl = f.M, f.y, f.delta
    x = np.linalg.lstsq(M, y, rcond=None)[0]
    pattern = None
    for _ in range(max_iter):
        r = M @ x - y
        inner = np.abs(r) <= dl
        sgn = np.where(inner, 0.0, np.sign(r))
        new_pattern = (inner.tobytes(), sgn.tobytes())
        MQ = M[inner]
        H = MQ.T @ MQ
        if np.linalg.matrix_rank(H) < f.dim:
            raise RuntimeError("huber: too few inlier residuals for a unique minimizer")
        rhs = MQ.T @ y[inner] - dl * (M[~inner].T @ sgn[~inner])
        x_exact = np.linalg.solve(H, rhs)
        if new_pattern == pattern:
            return x_exact
        pattern = new_pattern
        # damped move towards the piecewise-quadratic solution
        fx, a, d = f.value(x), 1.0, x_exact - x
        while f.value(x + a * d) > fx and a > 1e-12:
            a *= 0.5
        x = x + a * d
    raise RuntimeError("huber minimizer did not settle")


def huber_problem(M, y, delta=1.0, params=None):
    f = Huber(M, y, delta)
    z = _huber_solution(f)
    return CompositeProblem("huber", f, None, f.value(z), [z], None, params or {})


# --------------------------------------------------------------------- catalog

def _random_rotation(rng, dim):
    """Product of dim Householder reflections drawn from rng."""
    Q = np.eye(dim)
    for _ in range(dim):
        v = rng.normal(dim)
        v /= np.linalg.norm(v)
        Q = Q - 2.0 * np.outer(Q @ v, v)
    return Q


def catalog(name, dim, seed=0):
    """Build a seeded catalog problem.

    Parameters
    ----------
    name : str
        One of ``CATALOG_NAMES``.
    dim : int
        Dimension of the decision variable.
    seed : int
        SplitMix64 seed; the same (name, dim, seed) always gives the same instance.
    """
    if name not in CATALOG_NAMES:
        raise ValueError(f"unknown problem {name!r}; choose from {', '.join(CATALOG_NAMES)}")
    dim = int(dim)
    if dim < 1:
        raise ValueError("dim must be positive")
    rng = SplitMix64(seed)
    params = {"name": name, "dim": dim, "seed": int(seed)}

    if name == "quadratic-spd":
        if dim == 1:
            A = np.array([[1.0]])
        else:
            eig = np.logspace(-2.0, 0.0, dim)
            Q = _random_rotation(rng, dim)
            A = (Q * eig) @ Q.T
            A = 0.5 * (A + A.T)
        return quadratic_problem(name, A, [np.zeros(dim)], params=params)

    if name == "quadratic-degenerate":
        if dim < 2:
            raise ValueError("quadratic-degenerate needs dim >= 2")
        rank = dim // 2
        eig = np.zeros(dim)
        eig[0] = 1.0
        if rank > 1:
            eig[1:rank] = rng.uniform(0.1, 1.0, size=rank - 1)
        A = np.diag(eig)
        v = np.zeros(dim)
        v[-1] = 1.0
        return quadratic_problem(name, A, [np.zeros(dim), v], params=params)

    m = {"least-squares": 2, "lasso": 2, "logistic-l2": 4, "huber": 3}[name] * dim
    M = rng.normal((m, dim)) / math.sqrt(m)
    x_true = rng.normal(dim)
    noise = rng.normal(m)

    if name == "least-squares":
        return least_squares_problem(M, M @ x_true + 0.1 * noise, params)
    if name == "lasso":
        y = M @ x_true + 0.1 * noise
        tau = 0.2 * float(np.max(np.abs(M.T @ y)))
        return lasso_problem(M, y, tau, params)
    if name == "logistic-l2":
        M = M * math.sqrt(m)  # unit-variance features
        labels = np.where(M @ x_true + noise >= 0, 1.0, -1.0)
        return logistic_problem(M, labels, 1e-3, params)
    # huber: 10% gross outliers
    M = M * math.sqrt(m)
    y = M @ x_true + 0.1 * noise
    n_out = max(1, m // 10)
    y[:n_out] += 5.0 * np.sign(rng.normal(n_out))
    return huber_problem(M, y, 1.0, params)


# ------------------------------------------------------------------- file I/O

def _blocks(problem):
    f, g = problem.smooth, problem.nonsmooth
    if isinstance(f, Quadratic):
        data = {"A": f.A}
        scalars = {"family": "quadratic"}
    elif isinstance(f, LeastSquares):
        data = {"M": f.M, "y": f.y[None, :]}
        scalars = {"family": "lasso" if isinstance(g, L1Norm) else "least-squares"}
        if isinstance(g, L1Norm):
            scalars["tau"] = repr(g.tau)
    elif isinstance(f, Logistic):
        data = {"M": f.M, "labels": f.labels[None, :]}
        scalars = {"family": "logistic", "ridge": repr(f.ridge)}
    elif isinstance(f, Huber):
        data = {"M": f.M, "y": f.y[None, :]}
        scalars = {"family": "huber", "delta": repr(f.delta)}
    else:
        raise ValueError(f"cannot serialize objective of type {type(f).__name__}")
    if problem.known_minimizers:
        data["minimizers"] = np.vstack(problem.known_minimizers)
    return scalars, data


def dump_problem(problem, path):
    """Write a problem as one header line followed by rows of floats.

    Header: ``fistalyap-problem key=value ... blocks=A:3x3,minimizers:1x3``.
    The blocks then follow in the listed order, one matrix row per line,
    space separated, 17 significant digits.
    """
    scalars, data = _blocks(problem)
    head = {"name": problem.name, "dim": str(problem.dim), **scalars,
            "L": repr(problem.L), "optimal_value": repr(problem.optimal_value)}
    if problem.growth is not None:
        head["growth"] = repr(problem.growth)
    for k in ("seed",):
        if k in problem.params:
            head[k] = str(problem.params[k])
    head["blocks"] = ",".join(f"{k}:{v.shape[0]}x{v.shape[1]}" for k, v in data.items())
    lines = [HEADER_TAG + " " + " ".join(f"{k}={v}" for k, v in head.items())]
    for arr in data.values():
        for row in arr:
            lines.append(" ".join("%.17g" % v for v in row))
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        Path(path).write_text(text)


def load_problem(path):
    """Inverse of :func:`dump_problem`."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith(HEADER_TAG):
        raise ValueError(f"{path}: missing '{HEADER_TAG}' header")
    head = dict(tok.split("=", 1) for tok in text[0].split()[1:])
    rows = [ln for ln in text[1:] if ln.strip()]
    data, pos = {}, 0
    for spec in head["blocks"].split(","):
        key, shape = spec.split(":")
        nr, nc = (int(v) for v in shape.split("x"))
        block = np.array([[float(v) for v in rows[pos + i].split()] for i in range(nr)])
        if block.shape != (nr, nc):
            raise ValueError(f"{path}: block {key} has shape {block.shape}, header says {nr}x{nc}")
        data[key] = block
        pos += nr
    fam = head["family"]
    name = head["name"]
    mins = list(data.get("minimizers", np.empty((0, int(head["dim"])))))
    params = {"name": name, "dim": int(head["dim"]), "file": str(path)}
    if "seed" in head:
        params["seed"] = int(head["seed"])
    if fam == "quadratic":
        f, g = Quadratic(data["A"]), None
    elif fam == "least-squares":
        f, g = LeastSquares(data["M"], data["y"][0]), None
    elif fam == "lasso":
        f, g = LeastSquares(data["M"], data["y"][0]), L1Norm(float(head["tau"]))
    elif fam == "logistic":
        f, g = Logistic(data["M"], data["labels"][0], float(head["ridge"])), None
    elif fam == "huber":
        f, g = Huber(data["M"], data["y"][0], float(head["delta"])), None
    else:
        raise ValueError(f"{path}: unknown family {fam!r}")
    f.L = float(head["L"])
    fstar = None if head["optimal_value"] == "None" else float(head["optimal_value"])
    growth = float(head["growth"]) if "growth" in head else None
    return CompositeProblem(name, f, g, fstar, mins, growth, params)
