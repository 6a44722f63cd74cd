"""Bounded measurable drift families ``f: [0,1] x H -> H``.

A drift is ``f_n(t, z) = c_n * g_n(t, z)`` with a unit shape ``|g_n| <= 1`` and
per-mode scales ``c_n`` stored as logarithms, so that the super-exponentially
small scales demanded by the decay condition survive as finite numbers even
when ``c_n`` itself underflows to zero.
"""

import math
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
from scipy.special import logsumexp

from regnoise import rng

FAMILIES = ("zero", "constant", "lipschitz", "sign", "piecewise-random", "linear-test", "twisted")


def decay_log_bound(gamma, n):
    """``ln exp(-e^{n^gamma}) = -e^{n^gamma}`` or ``-inf`` on overflow."""
    try:
        return -math.exp(n ** gamma)
    except OverflowError:
        return -math.inf


def assumption_log_scales(dim, gamma, factor=1.0):
    """Log scales ``ln(factor) - e^{n^gamma}``: the largest admissible ``c_n`` when factor=1."""
    if factor <= 0:
        return np.full(dim, -np.inf)
    return np.array([math.log(factor) + decay_log_bound(gamma, n) for n in range(1, dim + 1)])


def _vector_param(value, dim):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (dim,)).copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DriftSpec:
    family: str
    log_scale: np.ndarray
    params: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))
    validated: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown drift family {self.family!r}")
        ls = np.array(self.log_scale, dtype=float)
        ls.setflags(write=False)
        object.__setattr__(self, "log_scale", ls)
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        if self.family == "linear-test" and self.validated:
            raise ValueError("the linear-test family is unbounded and cannot be validated")

    @property
    def dim(self):
        return self.log_scale.size

    @property
    def scale(self):
        return np.exp(self.log_scale)

    def shape(self, t, z):
        return _SHAPES[self.family](self, t, z)

    def __call__(self, t, z):
        return evaluate(self, t, z)

    # constructors

    @classmethod
    def zero(cls, dim):
        return cls("zero", np.full(dim, -np.inf))

    @classmethod
    def constant(cls, log_scale, direction=1.0):
        ls = np.asarray(log_scale, dtype=float)
        return cls("constant", ls, {"direction": _vector_param(np.sign(direction), ls.size)})

    @classmethod
    def lipschitz(cls, log_scale, shift=0.0):
        """``c_n sin(z_n - shift_n)``: Lipschitz constant ``max c_n`` in the H-norm."""
        ls = np.asarray(log_scale, dtype=float)
        return cls("lipschitz", ls, {"shift": _vector_param(shift, ls.size)})

    @classmethod
    def sign(cls, log_scale, threshold=0.0, threshold_slope=0.0):
        """``c_n sgn(z_n - a_n(t))`` with ``a_n(t) = threshold_n + threshold_slope_n t``."""
        ls = np.asarray(log_scale, dtype=float)
        return cls(
            "sign",
            ls,
            {"threshold": _vector_param(threshold, ls.size), "slope": _vector_param(threshold_slope, ls.size)},
        )

    @classmethod
    def piecewise_random(cls, log_scale, seed=0, time_cells=8, cell_width=0.05, space_cells=257):
        """Random +-1 on a time x space checkerboard; measurable, discontinuous."""
        ls = np.asarray(log_scale, dtype=float)
        gen = rng.stream(seed, 0, rng.DRIFT)
        table = gen.choice([-1.0, 1.0], size=(time_cells, ls.size, space_cells))
        table.setflags(write=False)
        return cls(
            "piecewise-random",
            ls,
            {"table": table, "cell_width": float(cell_width), "seed": int(seed)},
        )

    @classmethod
    def linear_test(cls, dim, slope=1.0):
        """``b(t, z) = slope * z``; unbounded, for exact quadrature oracles only."""
        return cls("linear-test", np.zeros(dim), {"slope": float(slope)}, validated=False)


def _zero(d, t, z):
    return np.zeros(np.shape(z))


def _constant(d, t, z):
    return np.broadcast_to(d.params["direction"], np.shape(z)).astype(float)


def _lipschitz(d, t, z):
    return np.sin(z - d.params["shift"])


def _threshold(d, t):
    t = np.asarray(t, dtype=float)[..., None]
    return d.params["threshold"] + d.params["slope"] * t


def _sign(d, t, z):
    return np.sign(z - _threshold(d, t))


def _piecewise_random(d, t, z):
    table = d.params["table"]
    tc, dim, sc = table.shape
    ti = np.clip(np.floor(np.asarray(t, dtype=float) * tc).astype(np.int64), 0, tc - 1)
    zi = np.floor(np.asarray(z) / d.params["cell_width"]).astype(np.int64) % sc
    ti = np.broadcast_to(ti[..., None], zi.shape)
    modes = np.broadcast_to(np.arange(dim), zi.shape)
    return table[ti, modes, zi]


def _linear(d, t, z):
    return d.params["slope"] * np.asarray(z, dtype=float)


def _twisted(d, t, z):
    base = d.params["base"]
    return base.shape(t, z) * twist_factor(d.params["eigenvalues"], d.params["end"], t)


_SHAPES = {
    "zero": _zero,
    "constant": _constant,
    "lipschitz": _lipschitz,
    "sign": _sign,
    "piecewise-random": _piecewise_random,
    "linear-test": _linear,
    "twisted": _twisted,
}


def evaluate(drift, t, z):
    """``f(t, z)``; ``z`` has shape (..., D) and ``t`` broadcasts against (...)."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != drift.dim:
        raise ValueError(f"z has {z.shape[-1]} components, drift has {drift.dim}")
    if np.any((np.asarray(t) < 0) | (np.asarray(t) > 1)):
        raise ValueError("t must lie in [0, 1]")
    return drift.scale * drift.shape(t, z)


def twist_factor(eigenvalues, end, t):
    """``exp(-lam (end - t))``, clamped to 1 for ``t > end``; shape (..., D)."""
    t = np.asarray(t, dtype=float)[..., None]
    return np.exp(-eigenvalues * np.maximum(end - t, 0.0))


def twist(drift, op, n, k):
    """Semigroup-twisted drift ``exp(-((k+1)2^{-n} - t)A) f(t, x)``."""
    if not 0 <= k < 2 ** n:
        raise ValueError(f"k={k} outside 0..{2 ** n - 1}")
    if drift.family == "zero":
        return drift
    params = {"base": drift, "eigenvalues": op.eigenvalues, "end": (k + 1) * 2.0 ** -n, "n": n, "k": k}
    return DriftSpec("twisted", drift.log_scale, params, validated=drift.validated)


# -- Assumption validation ---------------------------------------------------


@dataclass(frozen=True)
class Witness:
    condition: str  # "sup_norm" | "weighted_sum" | "component"
    component: int  # 1-based, 0 when not component specific
    sample: int
    t: float
    excess_log: float  # log of the factor by which the bound is exceeded


@dataclass(frozen=True)
class DecayCertificate:
    gamma: float
    log_margins: np.ndarray  # per component: log bound - log sup |f_n|
    sup_norm_log: float  # log sup |f|_H
    weighted_sum_log: float  # log sup sum lam e^{2 lam} |f_n|^2
    passed: bool
    witness: Witness | None
    closed_form: bool | None = None  # same check using |g_n| <= 1, when applicable

    @property
    def conditions(self):
        return {
            "sup_norm": self.sup_norm_log <= 0.0,
            "weighted_sum": self.weighted_sum_log <= 0.0,
            "component": bool(np.all(self.log_margins >= 0.0)),
        }


def default_samples(dim, seed=0, count=10_000, spread=2.0):
    """Random ``(t, z)`` pairs plus structured corners (t in {0, 1/2, 1}, z in {0, +-spread})."""
    gen = rng.stream(seed, 0, rng.SAMPLE)
    ts = gen.uniform(0.0, 1.0, size=count)
    zs = gen.normal(0.0, spread, size=(count, dim))
    corner_t = []
    corner_z = []
    for t in (0.0, 0.5, 1.0):
        for v in (0.0, spread, -spread):
            corner_t.append(t)
            corner_z.append(np.full(dim, v))
    return np.concatenate([ts, corner_t]), np.concatenate([zs, np.array(corner_z)])


def _log_abs(x):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(x))


def validate_assumption(drift, op, gamma, samples=None, seed=0):
    """Check the three sup conditions of the decay assumption on a sample grid.

    Every quantity is handled in log space, so components far below the double
    range still get a finite (or ``-inf``) margin.
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if drift.dim != op.dim:
        raise ValueError("drift and operator dimensions differ")
    if samples is None:
        samples = default_samples(drift.dim, seed)
    ts, zs = samples
    ts = np.asarray(ts, dtype=float)
    zs = np.asarray(zs, dtype=float)
    if ts.size == 0:
        raise ValueError("sample grid is empty")
    # log |f_n| per sample, shape (S, D)
    logf = drift.log_scale + _log_abs(drift.shape(ts, zs))
    lam = op.eigenvalues
    bounds = np.array([decay_log_bound(gamma, n) for n in range(1, drift.dim + 1)])

    sup_logs = 0.5 * logsumexp(2.0 * logf, axis=1)
    weighted = logsumexp(np.log(lam) + 2.0 * lam + 2.0 * logf, axis=1)
    worst_f = logf.max(axis=0)
    with np.errstate(invalid="ignore"):
        margins = np.where(np.isneginf(worst_f), np.inf, bounds - worst_f)

    witness = None
    i = int(np.argmax(sup_logs))
    if sup_logs[i] > 0:
        witness = Witness("sup_norm", 0, i, float(ts[i]), float(sup_logs[i]))
    i = int(np.argmax(weighted))
    if witness is None and weighted[i] > 0:
        witness = Witness("weighted_sum", 0, i, float(ts[i]), float(weighted[i]))
    n = int(np.argmin(margins))
    if witness is None and margins[n] < 0:
        s = int(np.argmax(logf[:, n]))
        witness = Witness("component", n + 1, s, float(ts[s]), float(-margins[n]))

    closed = None
    if drift.family in ("zero", "constant", "lipschitz", "sign", "piecewise-random"):
        ls = drift.log_scale
        closed = bool(
            0.5 * logsumexp(2.0 * ls) <= 0.0
            and logsumexp(np.log(lam) + 2.0 * lam + 2.0 * ls) <= 0.0
            and np.all((ls <= bounds) | np.isneginf(ls))
        )
    return DecayCertificate(
        gamma=float(gamma),
        log_margins=margins,
        sup_norm_log=float(sup_logs.max()),
        weighted_sum_log=float(weighted.max()),
        passed=witness is None,
        witness=witness,
        closed_form=closed,
    )


def make_drift(family, dim, gamma, amplitude=1.0, threshold=0.0, threshold_slope=0.0, seed=0, slope=1.0):
    """Build a named family with the largest scales the decay condition allows, times ``amplitude``."""
    ls = assumption_log_scales(dim, gamma, amplitude)
    if family == "zero":
        return DriftSpec.zero(dim)
    if family == "constant":
        return DriftSpec.constant(ls)
    if family == "lipschitz":
        return DriftSpec.lipschitz(ls, shift=threshold)
    if family == "sign":
        return DriftSpec.sign(ls, threshold, threshold_slope)
    if family == "piecewise-random":
        return DriftSpec.piecewise_random(ls, seed=seed)
    if family == "linear-test":
        return DriftSpec.linear_test(dim, slope)
    raise ValueError(f"unknown drift family {family!r}")
