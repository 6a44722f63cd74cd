"""Dyadic approximation lattices of the super-exponentially decaying sets Q_r.

``Q_r`` holds sequences with ``|x_n| <= 2 exp(-e^{n^gamma})`` and
``|x|_inf <= 2 * 2^{-r}``; ``scale=2`` gives ``2 Q_r``.  Component bounds
underflow doubles already at ``n = 2`` for ``gamma > 6``, so every membership
test compares natural logarithms.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)


class BudgetExceeded(RuntimeError):
    """Enumeration refused because the predicted point count is too large."""

    def __init__(self, predicted, budget):
        super().__init__(f"lattice has {predicted} points, budget is {budget}")
        self.predicted = predicted
        self.budget = budget


@dataclass(frozen=True)
class QDescriptor:
    gamma: float
    r: int = 0
    scale: int = 1

    def __post_init__(self):
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if self.r < 0 or int(self.r) != self.r:
            raise ValueError("r must be a nonnegative integer")
        if self.scale not in (1, 2):
            raise ValueError("scale must be 1 or 2")

    def log_bound(self, n):
        """Log of the admissible magnitude of component ``n`` (1-based)."""
        return math.log(self.scale) + min((1 - self.r) * LN2, component_bound_log(self.gamma, n))


@dataclass(frozen=True)
class LatticePoint:
    """Point with components ``coords[n] * 2^{-m}``."""

    m: int
    coords: tuple

    def values(self, dim=None):
        dim = len(self.coords) if dim is None else dim
        out = np.zeros(dim)
        k = np.asarray(self.coords[:dim], dtype=float)
        out[: k.size] = np.ldexp(k, -self.m)
        return out


@dataclass(frozen=True)
class LatticePoints:
    """All points of a lattice as an integer array of shape (N, d-1)."""

    m: int
    coords: np.ndarray

    def __len__(self):
        return self.coords.shape[0]

    def __iter__(self):
        for row in self.coords:
            yield LatticePoint(self.m, tuple(int(k) for k in row))

    def values(self):
        return np.ldexp(self.coords.astype(float), -self.m)


def component_bound_log(gamma, n):
    """``ln(2 exp(-e^{n^gamma})) = ln 2 - e^{n^gamma}``; ``-inf`` once it overflows."""
    try:
        return LN2 - math.exp(n ** gamma)
    except OverflowError:
        return -math.inf


def max_coordinate(q, m, n):
    """Largest ``k >= 0`` with ``k 2^{-m}`` admissible in component ``n``."""
    r_cap = q.scale * 2 ** (m - q.r + 1) if m - q.r + 1 >= 0 else 0
    logv = math.log(q.scale) + component_bound_log(q.gamma, n) + m * LN2
    if logv < 0:
        return 0
    return min(r_cap, math.floor(math.exp(logv)))


def coordinate_ranges(q, m):
    """``[kmax_1, kmax_2, ...]`` up to the last component with ``kmax >= 1``."""
    if m < q.r:
        raise ValueError(f"mesh exponent m={m} must be >= r={q.r}")
    out = []
    n = 1
    while True:
        k = max_coordinate(q, m, n)
        if k == 0:
            return out
        out.append(k)
        n += 1


def effective_dimension(q, m):
    """Smallest ``d`` such that every lattice point has ``x_n = 0`` for ``n >= d``."""
    return 1 + len(coordinate_ranges(q, m))


def effdim_bound(gamma, m):
    """``max(1, ceil(ln(m+1)^{1/gamma}))``.

    The uncapped value ``ln(m+1)^{1/gamma}`` is already beaten by the lattice
    itself at ``gamma=1, m=10`` (true value 3 > ln 11); the argument behind it
    only shows components vanish for ``n >= ln(m+1)^{1/gamma}``, hence the ceiling.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    return max(1, math.ceil(math.log(m + 1) ** (1.0 / gamma)))


def lattice_count(q, m):
    """Number of points, as the product of per-component ranges."""
    return math.prod(2 * k + 1 for k in coordinate_ranges(q, m))


def koltik_bound(q, m):
    """Counting bound ``(4 * scale * 2^{m-r} + 1)^{d}`` with ``d`` the effective dimension."""
    return (4 * q.scale * 2 ** (m - q.r) + 1) ** effective_dimension(q, m)


def enumerate_lattice(q, m, budget=10**7):
    """Exhaustive list of the points of ``scale * Q_r`` on the mesh ``2^{-m}``."""
    ranges = coordinate_ranges(q, m)
    predicted = math.prod(2 * k + 1 for k in ranges)
    if predicted > budget:
        raise BudgetExceeded(predicted, budget)
    if not ranges:
        return LatticePoints(m, np.zeros((1, 0), dtype=np.int64))
    axes = [np.arange(-k, k + 1, dtype=np.int64) for k in ranges]
    grids = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    return LatticePoints(m, coords)


def _round_half_toward_zero(v):
    return np.sign(v) * np.ceil(np.abs(v) - 0.5)


def check_membership(q, x):
    """Index (1-based) of the first component violating ``scale * Q_r``, else None."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(x))
    for i, lv in enumerate(logs, start=1):
        if lv > q.log_bound(i):
            return i
    return None


def project(q, m, x):
    """Nearest lattice point in the max-norm; ties broken toward zero."""
    if m < q.r:
        raise ValueError(f"mesh exponent m={m} must be >= r={q.r}")
    x = np.asarray(x, dtype=float)
    bad = check_membership(q, x)
    if bad is not None:
        raise ValueError(f"x is outside the set: component {bad} violates its bound")
    kmax = np.array([max_coordinate(q, m, n) for n in range(1, x.size + 1)], dtype=float)
    k = _round_half_toward_zero(np.ldexp(x, m))
    k = np.clip(k, -kmax, kmax)
    return LatticePoint(m, tuple(int(v) for v in k))


def is_dyadic(x):
    """Every finite double is an integer multiple of a power of 1/2."""
    return bool(np.all(np.isfinite(np.asarray(x, dtype=float))))


def log_subadditivity_margin(gamma, r, m):
    """``ln(r+1)^{1/g} + ln(m+1)^{1/g} - ln(r+m+1)^{1/g}`` (vectorized)."""
    r = np.asarray(r, dtype=float)
    m = np.asarray(m, dtype=float)
    g = 1.0 / np.asarray(gamma, dtype=float)
    return np.log1p(r) ** g + np.log1p(m) ** g - np.log1p(r + m) ** g


def check_log_subadditivity(gamma, r, m):
    lhs = math.log(r + m + 1) ** (1.0 / gamma)
    rhs = math.log(r + 1) ** (1.0 / gamma) + math.log(m + 1) ** (1.0 / gamma)
    return lhs <= rhs


def sample_lattice_points(q, m, count, gen, dim):
    """``count`` points drawn uniformly per component from the lattice, shape (count, dim)."""
    ranges = coordinate_ranges(q, m)[:dim]
    out = np.zeros((count, dim))
    for i, k in enumerate(ranges):
        out[:, i] = np.ldexp(gen.integers(-k, k + 1, size=count).astype(float), -m)
    return out


def iter_grid(gammas, rs, m_max):
    """(gamma, r, m) triples with ``r <= m <= m_max``."""
    for gamma, r in itertools.product(gammas, rs):
        for m in range(r, m_max + 1):
            yield gamma, r, m
