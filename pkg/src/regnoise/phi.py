"""Quadrature of the regularization functionals along a sampled OU path.

For a fixed path ``Z`` the functional over the dyadic interval
``[k 2^-n, (k+1) 2^-n]`` is

    phi_{n,k}(x, y) = int b(s, Z_s + x) - b(s, Z_s + y) ds,

evaluated by the left-endpoint Riemann sum on the path's own grid.  The path is
only known at nodes and ``b`` may be nowhere continuous, so higher order rules
buy nothing.
"""

from dataclasses import dataclass

import numpy as np

from regnoise.drift import evaluate

QUADRATURE_MIN = 16
RULE = "left-riemann"


class UnresolvedInterval(ValueError):
    """The path grid does not resolve the requested interval."""


@dataclass(frozen=True)
class PhiQuery:
    n: int
    k: int
    x: np.ndarray
    y: np.ndarray
    drift: object
    path: object


@dataclass(frozen=True)
class PhiResult:
    vector: np.ndarray
    h_norm: float
    subnodes: int
    rule: str = RULE


def interval_nodes(grid, a, b, quadrature_min=QUADRATURE_MIN):
    """Slice of node indices ``t_i`` in ``[a, b)``; both ends must be nodes."""
    try:
        i0 = grid.index_of(a)
        i1 = grid.index_of(b)
    except ValueError as exc:
        raise UnresolvedInterval(str(exc)) from None
    if i1 - i0 < quadrature_min:
        raise UnresolvedInterval(f"[{a}, {b}] holds {i1 - i0} subnodes, need {quadrature_min}")
    return slice(i0, i1)


def dyadic_slice(grid, n, k, quadrature_min=QUADRATURE_MIN):
    if not 0 <= k < 2 ** n:
        raise ValueError(f"k={k} outside 0..{2 ** n - 1}")
    a = k * 2.0 ** -n
    b = (k + 1) * 2.0 ** -n
    if b > grid.horizon + 1e-15:
        raise UnresolvedInterval(f"interval end {b} beyond horizon {grid.horizon}")
    return interval_nodes(grid, a, b, quadrature_min)


def phi_vector(drift, path, n, k, x, y=None, quadrature_min=QUADRATURE_MIN):
    """Raw vector value of ``phi_{n,k}(x, y)`` (``y = 0`` when omitted)."""
    sl = dyadic_slice(path.grid, n, k, quadrature_min)
    t = path.grid.times[sl]
    z = path.values[sl]
    x = np.asarray(x, dtype=float)
    bx = evaluate(drift, t, z + x)
    if y is None:
        by = evaluate(drift, t, z)
    else:
        by = evaluate(drift, t, z + np.asarray(y, dtype=float))
    return path.grid.step * np.sum(bx - by, axis=0)


def phi_eval(q, quadrature_min=QUADRATURE_MIN):
    sl = dyadic_slice(q.path.grid, q.n, q.k, quadrature_min)
    vec = phi_vector(q.drift, q.path, q.n, q.k, q.x, q.y, quadrature_min)
    return PhiResult(vec, float(np.linalg.norm(vec)), sl.stop - sl.start)


def functional_eval(drift, path, h, a, b, quadrature_min=1):
    """Left Riemann sum of ``b(s, Z_s + h(s))`` over ``[a, b)``."""
    sl = interval_nodes(path.grid, a, b, quadrature_min)
    t = path.grid.times[sl]
    vals = evaluate(drift, t, path.values[sl] + h.values[sl])
    return path.grid.step * np.sum(vals, axis=0)


@dataclass(frozen=True)
class PseudometricReport:
    cases: int
    identity_violations: int
    symmetry_violations: int
    triangle_violations: int
    worst_triangle_excess: float
    slack: float

    @property
    def violations(self):
        return self.identity_violations + self.symmetry_violations + self.triangle_violations


def pseudometric_check(drift, path, n, k, triples, quadrature_min=QUADRATURE_MIN):
    """Identity, symmetry and triangle inequality of ``|phi_{n,k}(., .)|_H`` on a fixed path."""
    slack = 1e-12 * 2.0 ** -n
    ident = sym = tri = 0
    worst = -np.inf
    count = 0

    def d(a, b):
        return float(np.linalg.norm(phi_vector(drift, path, n, k, a, b, quadrature_min)))

    for x, y, z in triples:
        count += 1
        if d(x, x) != 0.0:
            ident += 1
        dxy = d(x, y)
        if dxy != d(y, x):
            sym += 1
        excess = d(x, z) - dxy - d(y, z)
        worst = max(worst, excess)
        if excess > slack:
            tri += 1
    return PseudometricReport(count, ident, sym, tri, worst, slack)
