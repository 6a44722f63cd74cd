"""Diagonal positive operator, its semigroup and exact Ornstein-Uhlenbeck sampling.

The operator acts diagonally on a fixed orthonormal basis, ``A e_n = lam_n e_n``,
truncated to ``D`` modes.  The OU process ``Z_t = int_0^t exp(-(t-s)A) dB_s`` is
sampled with its exact one-step Gaussian transition so no time-discretization
bias enters variance checks.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from regnoise import rng


class TraceClassWarning(UserWarning):
    """Retained eigenvalues grow too slowly for A^{-1} to look trace class."""


def _readonly(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpectralOperator:
    """Nondecreasing positive eigenvalues ``lam_1 <= ... <= lam_D``."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = _readonly(self.eigenvalues)
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("eigenvalues must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ValueError("eigenvalues must be positive and finite")
        if np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be nondecreasing")
        object.__setattr__(self, "eigenvalues", lam)
        if lam.size >= 2:
            n = np.arange(1, lam.size + 1)
            slope = np.polyfit(np.log(n), np.log(lam), 1)[0]
            if slope < 1.01:
                warnings.warn(
                    f"eigenvalue growth exponent {slope:.3f} < 1.01 over the "
                    f"retained {lam.size} modes",
                    TraceClassWarning,
                    stacklevel=3,
                )

    @classmethod
    def power_law(cls, dim, alpha=2.0):
        """``lam_n = n**alpha`` for ``n = 1..dim``."""
        if dim < 1:
            raise ValueError("dim must be >= 1")
        return cls(np.arange(1, dim + 1, dtype=float) ** alpha)

    @property
    def truncation(self):
        return self.eigenvalues.size

    @property
    def dim(self):
        return self.eigenvalues.size


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``0 = t_0 < ... < t_M = horizon`` with ``horizon <= 1``."""

    steps: int
    horizon: float = 1.0
    times: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError("steps must be a positive integer")
        if not (0.0 < self.horizon <= 1.0):
            raise ValueError("horizon must lie in (0, 1]")
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "times", _readonly(np.linspace(0.0, self.horizon, self.steps + 1)))

    @property
    def step(self):
        return self.horizon / self.steps

    def index_of(self, t):
        """Node index of time ``t``; raises if ``t`` is not a grid node."""
        x = t / self.step
        i = int(round(x))
        if abs(x - i) > 1e-9 or not 0 <= i <= self.steps:
            raise ValueError(f"time {t} is not a node of the grid")
        return i


@dataclass(frozen=True)
class OUPath:
    """One trajectory; ``coefficients[n, i] = <Z_{t_i}, e_{n+1}>``."""

    grid: TimeGrid
    coefficients: np.ndarray
    seed: int
    replica: int

    @property
    def values(self):
        """Time-major view, shape ``(M+1, D)``."""
        return self.coefficients.T


def semigroup_apply(op, t, x):
    """``exp(-tA) x`` componentwise."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != op.dim:
        raise ValueError(f"x has length {x.shape[-1]}, expected {op.dim}")
    return np.exp(-op.eigenvalues * t) * x


def stationary_variance(op, n):
    """Variance ``1/(2 lam_n)`` of mode ``n`` (1-based) under the invariant law."""
    if not 1 <= n <= op.dim:
        raise IndexError(f"mode index {n} outside 1..{op.dim}")
    return 1.0 / (2.0 * op.eigenvalues[n - 1])


def marginal_variance(op, t):
    """Per-mode variance ``(1 - exp(-2 lam t)) / (2 lam)`` of ``Z_t``."""
    lam = op.eigenvalues
    return -np.expm1(-2.0 * lam * t) / (2.0 * lam)


def ou_from_noise(op, h, noise):
    """Run the exact transition with step ``h`` on standard normal ``noise`` of shape (..., M, D).

    Returns coefficients of shape (..., D, M+1).
    """
    noise = np.asarray(noise, dtype=float)
    lam = op.eigenvalues
    decay = np.exp(-lam * h)
    sd = np.sqrt(-np.expm1(-2.0 * lam * h) / (2.0 * lam))
    lead = noise.shape[:-2]
    out = np.zeros(lead + (op.dim, noise.shape[-2] + 1))
    for n in range(op.dim):
        out[..., n, 1:] = lfilter([sd[n]], [1.0, -decay[n]], noise[..., n], axis=-1)
    return out


def simulate_ou(op, grid, seed, replica=0, zero_noise=False):
    """Sample one OU path; a deterministic function of its arguments."""
    if zero_noise:
        noise = np.zeros((grid.steps, op.dim))
    else:
        noise = rng.stream(seed, replica, rng.OU).standard_normal((grid.steps, op.dim))
    coeffs = ou_from_noise(op, grid.step, noise)
    coeffs.setflags(write=False)
    return OUPath(grid=grid, coefficients=coeffs, seed=int(seed), replica=int(replica))


def simulate_ou_batch(op, grid, seed, replicas, workers=1):
    """Coefficients for replicas ``0..replicas-1``, shape (R, D, M+1).

    Replica ``i`` is bit-identical to ``simulate_ou(op, grid, seed, i)``.
    """
    def draw(i):
        return rng.stream(seed, i, rng.OU).standard_normal((grid.steps, op.dim))

    noise = np.stack(rng.ordered_map(draw, range(replicas), workers))
    return ou_from_noise(op, grid.step, noise)


def sample_ou_at(op, t, replicas, seed, substeps=1, workers=1):
    """Samples of ``Z_t``, shape (replicas, D), from ``substeps`` exact transitions of length ``t / substeps``.

    Unlike paths on a :class:`TimeGrid`, ``t`` may exceed 1; this is for
    checking the law of the process, not for driving the drift.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")

    def draw(i):
        return rng.stream(seed, i, rng.OU).standard_normal((substeps, op.dim))

    noise = np.stack(rng.ordered_map(draw, range(replicas), workers))
    return ou_from_noise(op, t / substeps, noise)[..., -1]


def truncation_tail_log(gamma, dim):
    """Natural log of the first dropped component bound ``exp(-e^{(D+1)^gamma})``."""
    try:
        return -math.exp((dim + 1) ** gamma)
    except OverflowError:
        return -math.inf
