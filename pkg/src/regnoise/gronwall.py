"""Discrete log-type Gronwall recursion and its closed-form cap."""

import math
from dataclasses import dataclass

import mpmath
import numpy as np


class GronwallAbort(ValueError):
    """The sequence left (0, 1) at index ``j``."""

    def __init__(self, j, value):
        super().__init__(f"beta_{j} = {value!r} is not in (0, 1)")
        self.j = j
        self.value = value


@dataclass(frozen=True)
class GronwallSequence:
    K: float
    m: int
    beta0: float
    values: np.ndarray

    @property
    def steps(self):
        return self.values.size - 1

    @property
    def cap(self):
        return closed_form_cap(self.K, self.beta0)


def check_preconditions(K, m, beta0, steps=None):
    errors = []
    if K < 0:
        errors.append("K must be >= 0")
    if m < 0 or int(m) != m:
        errors.append("m must be a nonnegative integer")
    elif K > math.log(2.0) * 2**m:
        errors.append(f"K={K} exceeds ln(2) 2^m = {math.log(2.0) * 2**m}")
    if not 0.0 < beta0 < 1.0:
        errors.append("beta0 must lie in (0, 1)")
    if steps is not None and not 0 <= steps <= 2**m:
        errors.append(f"steps must lie in 0..2^m = {2**m}")
    if errors:
        raise ValueError("; ".join(errors))


def run_recursion(K, m, beta0, steps=None):
    """Iterate ``beta_{j+1} = beta_j (1 + K 2^-m log2(1/beta_j))`` with equality.

    ``K = 0`` is admitted as a degenerate constant sequence.
    """
    check_preconditions(K, m, beta0, steps)
    steps = 2**m if steps is None else steps
    c = K * 2.0**-m
    out = np.empty(steps + 1)
    b = float(beta0)
    out[0] = b
    for j in range(1, steps + 1):
        b = b * (1.0 + c * math.log2(1.0 / b))
        if not 0.0 < b < 1.0:
            raise GronwallAbort(j, b)
        out[j] = b
    return GronwallSequence(float(K), int(m), float(beta0), out)


def replay_extended(K, m, beta0, steps=None, dps=50):
    """The same recursion in ``dps``-digit arithmetic, as mpmath floats."""
    steps = 2**m if steps is None else steps
    with mpmath.workdps(dps):
        c = mpmath.mpf(K) * mpmath.mpf(2) ** (-m)
        b = mpmath.mpf(beta0)
        out = [b]
        for _ in range(steps):
            b = b * (1 + c * mpmath.log(1 / b, 2))
            out.append(b)
        return out


def closed_form_cap(K, beta0):
    """``exp(log2(beta0) exp(-2K - 1))``."""
    if not 0.0 < beta0 < 1.0:
        raise ValueError("beta0 must lie in (0, 1)")
    if K < 0:
        raise ValueError("K must be >= 0")
    return math.exp(math.log2(beta0) * math.exp(-2.0 * K - 1.0))
