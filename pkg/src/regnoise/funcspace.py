"""Path functions on a time grid and the Lipschitz / dyadic step classes.

``Phi`` holds 2-Lipschitz (in the max-norm) maps into ``Q cap Q^A``;
``Phi_n`` holds maps constant on the dyadic intervals ``[k 2^-n, (k+1) 2^-n)``
whose dyadic-node increments obey the same Lipschitz budget.
"""

import math
from dataclasses import dataclass

import numpy as np

from regnoise.drift import decay_log_bound

PHI = "Phi"
PHI_N = "Phi_n"
UNTAGGED = "untagged"

_SLACK = 1e-12


@dataclass(frozen=True)
class PathFunction:
    """Values at grid nodes, shape (M+1, D), with an optional class tag."""

    grid: object
    values: np.ndarray
    tag: str = UNTAGGED
    level: int | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != self.grid.steps + 1:
            raise ValueError("values must have shape (M+1, D)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self):
        return self.values.shape[1]

    def at(self, t):
        return self.values[self.grid.index_of(t)]

    def sup_norm(self):
        """``max_i |h(t_i)|_H``."""
        return float(np.max(np.linalg.norm(self.values, axis=1)))


@dataclass(frozen=True)
class MembershipResult:
    passed: bool
    reason: str = ""
    nodes: tuple | None = None  # violating node pair (i, j), or (i,) for range failures
    component: int | None = None

    def __bool__(self):
        return self.passed


def range_box(op, gamma):
    """Per-component magnitude cap of ``Q cap Q^A``: min of both bounds and 2."""
    lam = op.eigenvalues
    q = np.array([math.exp(min(math.log(2.0) + decay_log_bound(gamma, n), 50.0)) for n in range(1, lam.size + 1)])
    qa = np.exp(-0.5 * (np.log(lam) + 2.0 * lam))
    return np.minimum(np.minimum(q, qa), 2.0)


def _range_violation(values, op, gamma):
    lam = op.eigenvalues
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(values))
    qlog = np.array([math.log(2.0) + decay_log_bound(gamma, n) for n in range(1, lam.size + 1)])
    qlog = np.minimum(qlog, math.log(2.0))
    bad_q = logs > qlog + _SLACK
    bad_qa = np.log(lam) + 2.0 * lam + 2.0 * logs > _SLACK
    bad = bad_q | bad_qa
    if np.any(bad):
        i, n = np.argwhere(bad)[0]
        return int(i), int(n) + 1
    return None


def _dyadic_stride(grid, n):
    if not math.isclose(grid.horizon, 1.0):
        raise ValueError("dyadic classes need a grid on [0, 1]")
    if grid.steps % 2 ** n:
        raise ValueError(f"grid with {grid.steps} steps does not resolve 2^-{n}")
    return grid.steps // 2 ** n


def check_membership(h, cls, op, gamma, n=None):
    """Verify class structure and range of ``h``; report the first violation."""
    if h.dim != op.dim:
        raise ValueError("dimension mismatch between path function and operator")
    v = h.values
    t = h.grid.times
    if cls == PHI:
        inc = np.max(np.abs(np.diff(v, axis=0)), axis=1)
        allowed = 2.0 * np.diff(t)
        bad = np.nonzero(inc > allowed + _SLACK)[0]
        if bad.size:
            i = int(bad[0])
            return MembershipResult(False, "lipschitz", (i, i + 1))
    elif cls == PHI_N:
        if n is None:
            raise ValueError("Phi_n needs the level n")
        s = _dyadic_stride(h.grid, n)
        for k in range(2 ** n):
            block = v[k * s : (k + 1) * s]
            off = np.nonzero(np.any(block != block[0], axis=1))[0]
            if off.size:
                return MembershipResult(False, "not constant", (k * s, k * s + int(off[0])))
        nodes = v[::s]
        inc = np.max(np.abs(np.diff(nodes, axis=0)), axis=1)
        bad = np.nonzero(inc > 2.0 * 2.0 ** -n + _SLACK)[0]
        if bad.size:
            i = int(bad[0])
            return MembershipResult(False, "dyadic increment", (i * s, (i + 1) * s))
    else:
        raise ValueError(f"unknown class {cls!r}")
    hit = _range_violation(v, op, gamma)
    if hit is not None:
        return MembershipResult(False, "range", (hit[0],), hit[1])
    return MembershipResult(True)


def dyadic_floor_projection(h, n):
    """``h_n(t) = floor(2^n h(k 2^-n)) / 2^n`` for ``t`` in ``[k 2^-n, (k+1) 2^-n)``.

    The node ``t = 1`` uses ``k = 2^n``.  The output is tagged ``Phi_n`` but is
    only a candidate; run :func:`check_membership` before relying on it.
    """
    if h.tag != PHI:
        raise ValueError("dyadic floor projection expects a Phi-tagged function")
    s = _dyadic_stride(h.grid, n)
    idx = (np.arange(h.grid.steps + 1) // s) * s
    vals = np.ldexp(np.floor(np.ldexp(h.values[idx], n)), -n)
    return PathFunction(h.grid, vals, PHI_N, n)


def oscillation_sum(h, n):
    """``sum_k |h((2k+1) 2^-(n+1)) - h(2k 2^-(n+1))|_inf`` over ``k = 0..2^n - 1``."""
    s = _dyadic_stride(h.grid, n + 1)
    left = h.values[0 : h.grid.steps : 2 * s]
    mid = h.values[s : h.grid.steps : 2 * s]
    return float(np.sum(np.max(np.abs(mid - left), axis=1)))


def constant_function(grid, x):
    x = np.asarray(x, dtype=float)
    return PathFunction(grid, np.tile(x, (grid.steps + 1, 1)))


def random_phi_member(grid, op, gamma, gen, amplitude=1.0):
    """Random walk with max-norm increments <= 2 h, clipped into ``Q cap Q^A``."""
    box = range_box(op, gamma) * (1 - 1e-12)
    h = grid.step
    steps = gen.uniform(-2.0 * h, 2.0 * h, size=(grid.steps, op.dim)) * amplitude
    v = np.zeros((grid.steps + 1, op.dim))
    v[0] = gen.uniform(-box, box)
    for i in range(grid.steps):
        v[i + 1] = np.clip(v[i] + steps[i], -box, box)
    return PathFunction(grid, v, PHI)


def random_phi_n_member(grid, op, gamma, m, gen):
    """Random element of ``Phi_m``: dyadic-node walk with steps <= 2 * 2^-m, held constant."""
    s = _dyadic_stride(grid, m)
    box = range_box(op, gamma)
    nodes = np.zeros((2 ** m + 1, op.dim))
    nodes[0] = np.ldexp(np.floor(np.ldexp(gen.uniform(-box, box), 40)), -40)
    for j in range(2 ** m):
        step = np.ldexp(np.floor(np.ldexp(gen.uniform(-2.0, 2.0, size=op.dim) * 2.0 ** -m, 40)), -40)
        nodes[j + 1] = np.clip(nodes[j] + step, -box, box)
    idx = np.arange(grid.steps + 1) // s
    return PathFunction(grid, nodes[idx], PHI_N, m)


def ramp_member(grid, op, gamma, component=0):
    """``h(t) = min(2t, cap) e_component``: a Phi member with Lipschitz constant exactly 2."""
    box = range_box(op, gamma)
    v = np.zeros((grid.steps + 1, op.dim))
    v[:, component] = np.minimum(2.0 * grid.times, box[component] * (1 - 1e-12))
    return PathFunction(grid, v, PHI)
