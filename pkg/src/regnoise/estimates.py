"""Monte Carlo harness for the probabilistic bounds on the regularization functionals.

The bounds involve existence constants that are never given numerically, so
the harness measures implied constants and checks how they scale with the
dyadic level ``n`` rather than comparing absolute values.  Doubly exponential
additive floors such as ``2^{-2^n}`` are carried as base-2 logarithms and
flagged once they drop below machine epsilon relative to the leading term.
"""

import math
from dataclasses import dataclass

import numpy as np

from regnoise import lattice, rng
from regnoise.phi import QUADRATURE_MIN, phi_vector
from regnoise.spectral import TimeGrid, simulate_ou

QUANTILES = (0.5, 0.95, 0.99)
EPS = np.finfo(float).eps
MC_CHUNK = 8192


def theta(gamma):
    """Exponent ``(2/3) gamma / (gamma + 2)`` of the pair-bound floor."""
    return 2.0 / 3.0 * gamma / (gamma + 2.0)


def pow2_floor(log2_value):
    """``2^{log2_value}``; Python floats underflow quietly to 0.0."""
    return 2.0**log2_value


def sigma_bound(n, gamma, x_inf):
    """``n^{1/2 + 1/gamma} 2^{-n/2} (|x|_inf + 2^{-2^n})`` and whether the floor is negligible."""
    floor = pow2_floor(-(2.0**n))
    return n ** (0.5 + 1.0 / gamma) * 2.0 ** (-n / 2) * (x_inf + floor), floor < EPS * x_inf


def rho_bound(n, gamma, d_inf):
    """``sqrt(n) 2^{-n/6} |x - y|_inf + 2^{-2^{theta n}}`` and whether the floor is negligible."""
    floor = pow2_floor(-(2.0 ** (theta(gamma) * n)))
    lead = math.sqrt(n) * 2.0 ** (-n / 6) * d_inf
    return lead + floor, floor < EPS * lead


@dataclass(frozen=True)
class EstimateReport:
    kind: str
    n_values: np.ndarray
    replicas: int
    samples: int
    quantiles: np.ndarray  # (len(n), 3) ratio quantiles at QUANTILES
    raw_q99: np.ndarray  # 99% quantile of |phi|_H / |x|_inf (or |x - y|_inf)
    fitted_slope: float  # slope of ln(99% ratio quantile) against n
    fitted_slope_raw: float
    gamma: float
    theta: float
    beta_A: float
    floor_negligible: np.ndarray  # per n

    def rows(self):
        for i, n in enumerate(self.n_values):
            yield (int(n), self.replicas * self.samples, *self.quantiles[i], self.raw_q99[i], bool(self.floor_negligible[i]))


def _slope(ns, q):
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0) or not np.all(np.isfinite(q)):
        return math.nan
    return float(np.polyfit(np.asarray(ns, dtype=float), np.log(q), 1)[0])


def scan_grid(n_values, quadrature_min=QUADRATURE_MIN):
    """Grid on [0, 1] resolving level ``max(n)`` with at least ``quadrature_min`` subnodes."""
    sub = 1 << max(0, math.ceil(math.log2(quadrature_min)))
    return TimeGrid(sub * 2 ** max(n_values), 1.0)


def _nonzero_points(q, m, count, gen, dim):
    if not lattice.coordinate_ranges(q, m):
        raise ValueError("sample lattice is {0}; nothing to scan")
    out = lattice.sample_lattice_points(q, m, count, gen, dim)
    for i in range(count):
        while not np.any(out[i]):
            out[i] = lattice.sample_lattice_points(q, m, 1, gen, dim)[0]
    return out


def _distinct_pairs(q, m, count, gen, dim):
    if not lattice.coordinate_ranges(q, m):
        raise ValueError("sample lattice is {0}; no distinct pairs")
    xs = lattice.sample_lattice_points(q, m, count, gen, dim)
    ys = lattice.sample_lattice_points(q, m, count, gen, dim)
    for i in range(count):
        while np.array_equal(xs[i], ys[i]):
            ys[i] = lattice.sample_lattice_points(q, m, 1, gen, dim)[0]
    return xs, ys


def _scan(kind, drift, op, n_values, replicas, seed, gamma, samples, lattice_m, quadrature_min, beta_A, workers):
    n_values = np.array(sorted(n_values), dtype=int)
    if replicas < 1 or samples < 1:
        raise ValueError("empty sample")
    if np.any(n_values < 1):
        raise ValueError("levels must be >= 1")
    grid = scan_grid(n_values, quadrature_min)
    scale = 2 if kind == "sigma" else 1
    qset = lattice.QDescriptor(max(gamma, 1.0), 0, scale)

    def one(rep):
        path = simulate_ou(op, grid, seed, rep)
        gen = rng.stream(seed, rep, rng.SAMPLE)
        ratio = np.empty((n_values.size, samples))
        raw = np.empty_like(ratio)
        neg = np.empty(n_values.size, dtype=bool)
        for i, n in enumerate(n_values):
            ks = gen.integers(0, 2**n, size=samples)
            if kind == "sigma":
                xs = _nonzero_points(qset, lattice_m, samples, gen, op.dim)
                ys = np.zeros_like(xs)
            else:
                xs, ys = _distinct_pairs(qset, lattice_m, samples, gen, op.dim)
            for s in range(samples):
                vec = phi_vector(drift, path, int(n), int(ks[s]), xs[s], ys[s], quadrature_min)
                norm = float(np.linalg.norm(vec))
                d = float(np.max(np.abs(xs[s] - ys[s])))
                if kind == "sigma":
                    b, neg[i] = sigma_bound(int(n), gamma, d)
                else:
                    b, neg[i] = rho_bound(int(n), gamma, d)
                ratio[i, s] = norm / (beta_A * b)
                raw[i, s] = norm / d
        return ratio, raw, neg

    results = rng.ordered_map(one, range(replicas), workers)
    ratio = np.concatenate([r[0] for r in results], axis=1)
    raw = np.concatenate([r[1] for r in results], axis=1)
    neg = results[0][2]
    qs = np.quantile(ratio, QUANTILES, axis=1).T
    raw99 = np.quantile(raw, 0.99, axis=1)
    return EstimateReport(
        kind=kind,
        n_values=n_values,
        replicas=replicas,
        samples=samples,
        quantiles=qs,
        raw_q99=raw99,
        fitted_slope=_slope(n_values, qs[:, 2]),
        fitted_slope_raw=_slope(n_values, raw99),
        gamma=float(gamma),
        theta=theta(gamma),
        beta_A=float(beta_A),
        floor_negligible=neg,
    )


def sigma_scan(drift, op, n_values, replicas, seed=0, gamma=7.0, samples=4, lattice_m=8,
               quadrature_min=QUADRATURE_MIN, beta_A=1.0, workers=1):
    """Quantiles of ``|phi_{n,k}(x)|_H`` against the single-point bound, ``x`` from the lattice of ``2Q``."""
    return _scan("sigma", drift, op, n_values, replicas, seed, gamma, samples, lattice_m, quadrature_min, beta_A, workers)


def rho_scan(drift, op, n_values, replicas, seed=0, gamma=7.0, samples=4, lattice_m=8,
             quadrature_min=QUADRATURE_MIN, beta_A=1.0, workers=1):
    """Quantiles of ``|phi_{n,k}(x, y)|_H`` against the pair bound, ``x != y`` from the lattice of ``Q``."""
    return _scan("rho", drift, op, n_values, replicas, seed, gamma, samples, lattice_m, quadrature_min, beta_A, workers)


# -- Euler chains ------------------------------------------------------------


@dataclass(frozen=True)
class EulerChain:
    n: int
    k: int
    r: int
    points: np.ndarray  # (r+1, D)
    phis: np.ndarray  # (r, D): phi_{n,k+q}(b_q; x_q)
    errors: np.ndarray  # (r, D): zero by construction


def _drift_at(drifts, q):
    if isinstance(drifts, (list, tuple)):
        return drifts[q]
    return drifts


def euler_chain(drifts, op, path, n, k, r, x0, enforce_regime=True, quadrature_min=QUADRATURE_MIN):
    """``x_{q+1} = x_q + phi_{n,k+q}(b_q; x_q)`` for ``q = 0..r-1`` on one path."""
    if enforce_regime and r > 2.0 ** (n / 4):
        raise ValueError(f"r={r} exceeds 2^(n/4) = {2.0 ** (n / 4):.3f}; pass enforce_regime=False to override")
    if k < 0 or k + r > 2**n - 1:
        raise ValueError(f"interval overflow: k + r = {k + r} > 2^n - 1 = {2**n - 1}")
    pts = np.zeros((r + 1, op.dim))
    pts[0] = x0
    phis = np.zeros((r, op.dim))
    for q in range(r):
        phis[q] = phi_vector(_drift_at(drifts, q), path, n, k + q, pts[q], None, quadrature_min)
        pts[q + 1] = pts[q] + phis[q]
    return EulerChain(n, k, r, pts, phis, np.zeros((r, op.dim)))


@dataclass(frozen=True)
class ChainSumReport:
    left: float
    term_x: float  # 2^-n sum_{q<=N} |x_q|_H
    term_x0: float  # 2^{-3n/4} |x_0|_H
    term_error: float  # 2^{-n/24} sum |gamma_q|_H
    term_floor: float  # N 2^{-2^{theta n}}
    floor_negligible: bool
    phis: np.ndarray
    errors: np.ndarray

    @property
    def bracket(self):
        return self.term_x + self.term_x0 + self.term_error + self.term_floor

    @property
    def implied_constant(self):
        """``left / bracket``; nan when both vanish."""
        if self.bracket == 0.0:
            return math.nan if self.left == 0.0 else math.inf
        return self.left / self.bracket


def chain_sum_estimate(drifts, path, n, k, points, gamma=7.0, errors=None, quadrature_min=QUADRATURE_MIN):
    """Left side and bracketed terms of the chain-sum bound for points ``x_0..x_N``.

    ``errors`` defaults to the Euler defects ``x_{q+1} - x_q - phi_{n,k+q}(b_q; x_q)``;
    pass an :class:`EulerChain`'s own (zero) errors to skip recomputing them.
    """
    if isinstance(points, EulerChain):
        if errors is None:
            errors = points.errors
        points = points.points
    points = np.asarray(points, dtype=float)
    big_n = points.shape[0] - 1
    if big_n > 2**n or k < 0 or k + big_n > 2**n:
        raise ValueError(f"need N <= 2^n and k + N <= 2^n (N={big_n}, k={k}, n={n})")
    phis = np.zeros((big_n, points.shape[1]))
    left = 0.0
    for q in range(big_n):
        b = _drift_at(drifts, q)
        phis[q] = phi_vector(b, path, n, k + q, points[q], None, quadrature_min)
        left += float(np.linalg.norm(phi_vector(b, path, n, k + q, points[q + 1], points[q], quadrature_min)))
    if errors is None:
        errors = points[1:] - points[:-1] - phis
    norms = np.linalg.norm(points, axis=1)
    term_x = 2.0**-n * float(np.sum(norms))
    term_x0 = 2.0 ** (-3 * n / 4) * float(norms[0])
    term_err = 2.0 ** (-n / 24) * float(np.sum(np.linalg.norm(errors, axis=1)))
    floor = big_n * pow2_floor(-(2.0 ** (theta(gamma) * n)))
    lead = term_x + term_x0 + term_err
    return ChainSumReport(left, term_x, term_x0, term_err, floor, floor < EPS * lead, phis, np.asarray(errors))


def chain_sum_scan(drift, op, n, big_n, replicas, seed=0, gamma=7.0, lattice_m=8,
                   quadrature_min=QUADRATURE_MIN, workers=1):
    """Implied constants of Euler chains of length ``big_n`` over fresh paths."""
    grid = scan_grid([n], quadrature_min)
    qset = lattice.QDescriptor(max(gamma, 1.0), 0, 1)

    def one(rep):
        path = simulate_ou(op, grid, seed, rep)
        gen = rng.stream(seed, rep, rng.SAMPLE)
        k = int(gen.integers(0, 2**n - big_n))
        x0 = _nonzero_points(qset, lattice_m, 1, gen, op.dim)[0]
        chain = euler_chain(drift, op, path, n, k, big_n, x0, enforce_regime=False, quadrature_min=quadrature_min)
        return chain_sum_estimate(drift, path, n, k, chain, gamma, quadrature_min=quadrature_min)

    return rng.ordered_map(one, range(replicas), workers)


# -- martingale checks -------------------------------------------------------


@dataclass(frozen=True)
class BDGResult:
    family: str
    p: float
    n: int
    lhs: float  # (E|M_n|^p)^{1/p}
    rhs: float  # (E <M>_n^{p/2})^{1/p}
    exact: bool

    @property
    def ratio(self):
        return self.lhs / self.rhs


def _pm1_enumeration(n):
    idx = np.arange(2**n, dtype=np.int64)
    ones = np.zeros(idx.size, dtype=np.int64)
    for b in range(n):
        ones += (idx >> b) & 1
    return 2 * ones - n


def _increments(family, gen, shape, c=1.0):
    if family in ("pm1", "pm"):
        return c * (2.0 * gen.integers(0, 2, size=shape) - 1.0)
    if family == "uniform":
        return gen.uniform(-c, c, size=shape)
    if family == "gaussian":
        return c * gen.standard_normal(shape)
    if family == "zero":
        return np.zeros(shape)
    raise ValueError(f"unknown increment family {family!r}")


def _mc_chunks(replicas, fn, workers):
    chunks = [(i, min(MC_CHUNK, replicas - i * MC_CHUNK)) for i in range(math.ceil(replicas / MC_CHUNK))]
    return rng.ordered_map(fn, chunks, workers)


def bdg_check(p, n, family="pm1", replicas=100_000, seed=0, workers=1):
    """Ratio ``(E|M_n|^p)^{1/p} / (E [M]_n^{p/2})^{1/p}`` for a martingale with i.i.d. centred increments.

    The square function ``[M]_n = sum X_i^2`` plays the role of the bracket.
    Plus/minus one walks with ``n <= 20`` are enumerated exactly.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    if n < 1:
        raise ValueError("n must be >= 1")
    if family == "pm1" and n <= 20:
        m = _pm1_enumeration(n).astype(float)
        lhs = float(np.mean(np.abs(m) ** p)) ** (1.0 / p)
        rhs = float(n) ** 0.5
        return BDGResult(family, p, n, lhs, rhs, True)

    def chunk(arg):
        i, size = arg
        x = _increments(family, rng.stream(seed, i, rng.MARTINGALE), (size, n))
        return np.sum(np.abs(x.sum(axis=1)) ** p), np.sum(np.sum(x**2, axis=1) ** (p / 2))

    parts = _mc_chunks(replicas, chunk, workers)
    lhs = (sum(a for a, _ in parts) / replicas) ** (1.0 / p)
    rhs = (sum(b for _, b in parts) / replicas) ** (1.0 / p)
    return BDGResult(family, p, n, lhs, rhs, False)


CERTIFIED = ("zero", "pm", "uniform")


@dataclass(frozen=True)
class ExpMomentResult:
    family: str
    C: float
    r: int
    replicas: int
    estimate: float  # positive-part convention
    se: float
    estimate_abs: float  # |M_r| variant
    se_abs: float


def exp_moment_check(C, r, family="pm", replicas=100_000, seed=0, workers=1):
    """Monte Carlo ``E exp((1/8) (M_r^+ / (C sqrt r))^{1/2})`` for bounded-increment walks.

    Only families whose increments satisfy ``|X| <= C`` (hence
    ``E X^p <= C^p p^p``) are accepted.
    """
    if family not in CERTIFIED:
        raise ValueError(f"family {family!r} has no moment certificate; use one of {CERTIFIED}")
    if C <= 0 or r < 1:
        raise ValueError("need C > 0 and r >= 1")
    norm = C * math.sqrt(r)

    def chunk(arg):
        i, size = arg
        m = _increments(family, rng.stream(seed, i, rng.MARTINGALE), (size, r), C).sum(axis=1)
        pos = np.exp(0.125 * np.sqrt(np.maximum(m, 0.0) / norm))
        ab = np.exp(0.125 * np.sqrt(np.abs(m) / norm))
        return pos.sum(), (pos**2).sum(), ab.sum(), (ab**2).sum()

    parts = np.array(_mc_chunks(replicas, chunk, workers))
    s1, s2, a1, a2 = parts.sum(axis=0)
    mean = s1 / replicas
    mean_abs = a1 / replicas
    var = max(s2 / replicas - mean**2, 0.0) * replicas / max(replicas - 1, 1)
    var_abs = max(a2 / replicas - mean_abs**2, 0.0) * replicas / max(replicas - 1, 1)
    return ExpMomentResult(family, C, r, replicas, mean, math.sqrt(var / replicas), mean_abs, math.sqrt(var_abs / replicas))
