"""Picard iteration for the mild integral equation on a fixed noise path.

The convolution ``int_0^t exp(-(t-s)A) g(s) ds`` is evaluated with an
exponential integrator: ``g`` is frozen at the left node of each subinterval
and the semigroup factor is integrated exactly,

    int_{t_j}^{t_{j+1}} exp(-lam (t_i - s)) ds
        = exp(-lam (t_i - t_{j+1})) (1 - exp(-lam h)) / lam.

Summing these weights is a first-order linear recursion, run with
``scipy.signal.lfilter`` mode by mode.
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from regnoise import funcspace, rng
from regnoise.drift import evaluate
from regnoise.funcspace import PathFunction
from regnoise.spectral import TimeGrid, simulate_ou

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MildSolveConfig:
    steps: int = 1024
    horizon: float = 1.0
    tolerance: float = 1e-9
    max_iter: int = 200
    damping: float = 1.0

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


@dataclass(frozen=True)
class SolutionPath:
    function: PathFunction
    residual: float
    iterations: int
    converged: bool

    @property
    def values(self):
        return self.function.values


@dataclass(frozen=True)
class UniquenessReport:
    paths: int
    inits: int
    max_distance: np.ndarray  # per path; nan when fewer than two runs converged
    nonconverged: np.ndarray  # per path count
    iterations: np.ndarray  # per path, max over inits
    tolerance: float

    @property
    def success(self):
        ok = (self.nonconverged == 0) & (self.max_distance < 10.0 * self.tolerance)
        return ok

    @property
    def success_fraction(self):
        return float(np.mean(self.success))

    @property
    def nonconvergence_count(self):
        return int(np.sum(self.nonconverged))


def exponential_weight(lam, h):
    """``(1 - exp(-lam h)) / lam``, tending to ``h`` as ``lam -> 0``."""
    lam = np.asarray(lam, dtype=float)
    safe = np.where(lam > 0, lam, 1.0)
    return np.where(lam > 0, -np.expm1(-safe * h) / safe, h)


def convolve(op, grid, g):
    """``c(t_i) = sum_{j<i} weight(i, j) g(t_j)`` for ``g`` of shape (M+1, D)."""
    lam = op.eigenvalues
    h = grid.step
    w = exponential_weight(lam, h)
    decay = np.exp(-lam * h)
    out = np.zeros_like(g, dtype=float)
    for n in range(op.dim):
        out[1:, n] = lfilter([w[n]], [1.0, -decay[n]], g[:-1, n])
    return out


def _check_grid(path, current):
    if current.grid != path.grid:
        raise ValueError("path function and noise path live on different grids")
    if path.grid.horizon > 1.0:
        raise ValueError("drift is only defined on [0, 1]")


def picard_step_mild(drift, op, x0, path, current):
    """One application of ``x -> exp(-tA) x0 + int exp(-(t-s)A) f(s, x_s) ds + Z``."""
    _check_grid(path, current)
    grid = path.grid
    t = grid.times
    free = np.exp(-np.outer(t, op.eigenvalues)) * np.asarray(x0, dtype=float)
    f = evaluate(drift, t, current.values)
    return PathFunction(grid, free + convolve(op, grid, f) + path.values)


def picard_step_difference(drift, op, path, current):
    """One application of ``u -> int exp(-(t-s)A) (f(s, Z_s + u_s) - f(s, Z_s)) ds``."""
    _check_grid(path, current)
    grid = path.grid
    t = grid.times
    z = path.values
    g = evaluate(drift, t, z + current.values) - evaluate(drift, t, z)
    return PathFunction(grid, convolve(op, grid, g))


def sup_distance(a, b):
    """``max_i |a(t_i) - b(t_i)|_H``."""
    return float(np.max(np.linalg.norm(np.asarray(a) - np.asarray(b), axis=1)))


def _iterate(step, init, cfg):
    x = init
    y = step(x)
    for it in range(1, cfg.max_iter + 1):
        if cfg.damping == 1.0:
            x = y
        else:
            x = PathFunction(x.grid, (1.0 - cfg.damping) * x.values + cfg.damping * y.values)
        y = step(x)
        residual = sup_distance(y.values, x.values)
        if residual <= cfg.tolerance:
            return SolutionPath(x, residual, it, True)
    return SolutionPath(x, residual, cfg.max_iter, False)


def solve_mild(drift, op, x0, path, cfg, init=None):
    """Picard iteration from ``init`` (zero function by default) until the residual is below tolerance.

    Non-convergence is returned with ``converged=False``, never raised.
    """
    if init is None:
        init = PathFunction(path.grid, np.zeros((path.grid.steps + 1, op.dim)))
    if drift.dim != op.dim or len(x0) != op.dim:
        raise ValueError("drift, operator and x0 dimensions must agree")
    return _iterate(lambda x: picard_step_mild(drift, op, x0, path, x), init, cfg)


def solve_difference(drift, op, path, u_init, cfg):
    """Picard iteration of the difference map; the zero function is an exact fixed point."""
    if drift.dim != op.dim:
        raise ValueError("drift and operator dimensions must agree")
    return _iterate(lambda u: picard_step_difference(drift, op, path, u), u_init, cfg)


def initial_guesses(grid, op, gamma, count, gen):
    """Zero, a ramp and seeded random members of the Lipschitz class, validated first."""
    guesses = [PathFunction(grid, np.zeros((grid.steps + 1, op.dim)), funcspace.PHI)]
    if count > 1:
        guesses.append(funcspace.ramp_member(grid, op, gamma))
    while len(guesses) < count:
        guesses.append(funcspace.random_phi_member(grid, op, gamma, gen))
    for g in guesses[:count]:
        res = funcspace.check_membership(g, funcspace.PHI, op, gamma)
        if not res:
            raise RuntimeError(f"initial guess failed class check: {res}")
    return guesses[:count]


def _one_path(drift, op, x0, cfg, seed, inits, gamma, p):
    grid = TimeGrid(cfg.steps, cfg.horizon)
    path = simulate_ou(op, grid, seed, p)
    gen = rng.stream(seed, p, rng.INIT)
    sols = [solve_mild(drift, op, x0, path, cfg, g) for g in initial_guesses(grid, op, gamma, inits, gen)]
    good = [s for s in sols if s.converged]
    if len(good) >= 2:
        dist = max(sup_distance(a.values, b.values) for a, b in itertools.combinations(good, 2))
    else:
        dist = np.nan
    return dist, len(sols) - len(good), max(s.iterations for s in sols)


def uniqueness_experiment(drift, op, paths, inits, cfg, seed, x0=None, gamma=7.0, workers=1):
    """Solve from several initial guesses on each of ``paths`` noise paths and compare."""
    if inits < 2:
        raise ValueError("need at least two initializations")
    x0 = np.zeros(op.dim) if x0 is None else np.asarray(x0, dtype=float)
    rows = rng.ordered_map(
        lambda p: _one_path(drift, op, x0, cfg, seed, inits, gamma, p), range(paths), workers
    )
    dist, nonconv, iters = (np.array(c) for c in zip(*rows))
    report = UniquenessReport(paths, inits, dist.astype(float), nonconv.astype(int), iters.astype(int), cfg.tolerance)
    log.info("uniqueness: success fraction %.3f over %d paths", report.success_fraction, paths)
    return report
