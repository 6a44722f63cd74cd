"""Acceptance suite: one printed PASS/FAIL line per criterion.

Run under pytest (``pytest -v tests/test_acceptance.py``) or directly
(``python3 tests/test_acceptance.py``) for the bare summary lines.
"""

import io
import math
import sys
import time

import mpmath
import numpy as np
import pytest

from regnoise import estimates, funcspace, lattice
from regnoise.cli import run
from regnoise.drift import DriftSpec, make_drift
from regnoise.gronwall import GronwallAbort, closed_form_cap, replay_extended, run_recursion
from regnoise.lattice import QDescriptor
from regnoise.phi import pseudometric_check
from regnoise.solver import MildSolveConfig, uniqueness_experiment
from regnoise.spectral import SpectralOperator, TimeGrid, sample_ou_at, simulate_ou, simulate_ou_batch

LN2 = math.log(2.0)

# pinned tolerances and sizes
OU_REPLICAS = 10**5
OU_SE_COUNT = 4.0
OU_SECONDS = 10.0
LATTICE_SECONDS = 30.0
PROJECTION_MAX_POINTS = 10**4
SUBADD_MAX = 1000
PSEUDO_TRIPLES = 10**3
PSEUDO_SLACK = 1e-12  # times 2^-n
OSC_MEMBERS = 10**3
OSC_SLACK = 1e-12
GRONWALL_CASES = 10**3
GRONWALL_MAX_M = 14
GRONWALL_REL_SLACK = 1e-12
GRONWALL_REPLAY_TOL = 1e-14
GRONWALL_REPLAY_CASES = 100
BDG_MAX_N = 12
BDG_P = (2, 4, 6)
EXP_R = (10, 100)
EXP_REPLICAS = 10**5
EXP_SE_COUNT = 3.0
SLOPE_TOL = 0.05
SCAN_PATHS = 200
SCAN_N = range(4, 11)
SCAN_SECONDS = 300.0
UNIQ_PATHS = 50
UNIQ_INITS = 3
UNIQ_TOL = 1e-9
UNIQ_DISTANCE = 1e-8
UNIQ_FRACTION = 0.95
UNIQ_SECONDS = 600.0
WORKER_COUNTS = (1, 4, 8)


def report(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line, flush=True)
    return ok


def variance_se(x):
    """Sample variance and its standard error from the fourth central moment."""
    n = x.size
    c = x - x.mean()
    var = float(np.sum(c**2) / (n - 1))
    m4 = float(np.mean(c**4))
    return var, math.sqrt(max(m4 - var**2, 0.0) / n)


def criterion_1():
    start = time.perf_counter()
    op = SpectralOperator([2.0])
    z1 = simulate_ou_batch(op, TimeGrid(16), seed=1, replicas=OU_REPLICAS, workers=4)[:, 0, -1]
    var1, se1 = variance_se(z1)
    target1 = -math.expm1(-4.0) / 4
    z10 = sample_ou_at(op, 10.0, OU_REPLICAS, seed=2, workers=4)[:, 0]
    var10, se10 = variance_se(z10)
    target10 = 1 / (2 * 2.0)
    elapsed = time.perf_counter() - start
    ok = abs(var1 - target1) <= OU_SE_COUNT * se1 and abs(var10 - target10) <= OU_SE_COUNT * se10
    ok = ok and elapsed < OU_SECONDS
    return report(1, ok, f"var(t=1)={var1:.5f} vs {target1:.5f} (se {se1:.1e}); "
                         f"var(t=10)={var10:.5f} vs {target10} (se {se10:.1e}); {elapsed:.1f}s")


def criterion_2():
    start = time.perf_counter()
    gen = np.random.default_rng(0)
    bad = []
    projected = 0
    for gamma, r, m in lattice.iter_grid((1, 2, 7), (0, 1, 2), 14):
        q = QDescriptor(gamma, r)
        pts = lattice.enumerate_lattice(q, m)
        coords = pts.coords
        nonzero = np.flatnonzero(np.any(coords != 0, axis=0))
        brute = 1 + (int(nonzero[-1]) + 1 if nonzero.size else 0)
        if brute > lattice.effdim_bound(gamma, m):
            bad.append(("effdim", gamma, r, m))
        oracle = math.prod(2 * k + 1 for k in lattice.coordinate_ranges(q, m))
        if len(pts) != oracle or len(pts) > lattice.koltik_bound(q, m):
            bad.append(("count", gamma, r, m))
        if len(pts) > PROJECTION_MAX_POINTS or coords.shape[1] == 0:
            continue
        lat = pts.values()
        dim = lat.shape[1]
        caps = np.exp([q.log_bound(n) for n in range(1, dim + 1)])
        for x in gen.uniform(-caps, caps, size=(50, dim)):
            p = np.asarray(lattice.project(q, m, x).values(dim))
            best = np.min(np.max(np.abs(lat - x), axis=1))
            projected += 1
            if np.max(np.abs(x - p)) > best:
                bad.append(("projection", gamma, r, m))
                break
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < LATTICE_SECONDS
    return report(2, ok, f"{len(bad)} failures, {projected} exhaustive projections; {elapsed:.1f}s")


def criterion_3():
    r = np.arange(SUBADD_MAX + 1)[:, None]
    m = np.arange(SUBADD_MAX + 1)[None, :]
    violations = sum(int(np.sum(lattice.log_subadditivity_margin(g, r, m) < 0)) for g in range(1, 11))
    return report(3, violations == 0, f"{violations} violations on {10 * (SUBADD_MAX + 1) ** 2} cases")


def criterion_4():
    op = SpectralOperator.power_law(8)
    path = simulate_ou(op, TimeGrid(1024), seed=4)
    drift = make_drift("sign", 8, 7.0)
    box = funcspace.range_box(op, 7.0)
    gen = np.random.default_rng(4)
    total = 0
    worst = -math.inf
    for n, k in ((1, 0), (2, 3), (4, 9), (6, 40)):
        triples = gen.uniform(-box, box, size=(PSEUDO_TRIPLES, 3, 8))
        rep = pseudometric_check(drift, path, n, k, list(triples))
        assert rep.slack == PSEUDO_SLACK * 2.0**-n
        total += rep.violations
        worst = max(worst, rep.worst_triangle_excess / 2.0**-n)
    return report(4, total == 0, f"{total} violations, worst triangle excess {worst:.2e} x 2^-n")


def criterion_5():
    op = SpectralOperator.power_law(8)
    grid = TimeGrid(512)
    gen = np.random.default_rng(5)
    worst = 0.0
    bad = 0
    for i in range(OSC_MEMBERS):
        h = (funcspace.random_phi_member(grid, op, 7.0, gen) if i % 2 == 0
             else funcspace.random_phi_n_member(grid, op, 7.0, int(gen.integers(0, 10)), gen))
        if not funcspace.check_membership(h, h.tag, op, 7.0, h.level):
            bad += 1
            continue
        s = max(funcspace.oscillation_sum(h, n) for n in range(1, 9))
        worst = max(worst, s)
    ok = bad == 0 and worst <= 1.0 + OSC_SLACK
    return report(5, ok, f"max oscillation sum {worst:.6f} over {OSC_MEMBERS} members, {bad} invalid")


def criterion_6():
    gen = np.random.default_rng(6)
    valid = aborted = over = 0
    worst = 0.0
    replay_err = 0.0
    replayed = 0
    while valid < GRONWALL_CASES:
        m = int(gen.integers(0, GRONWALL_MAX_M + 1))
        K = float(gen.uniform(0, LN2 * 2**m))
        b0 = float(10.0 ** gen.uniform(-12, 0))
        if not 0 < b0 < 1:
            continue
        try:
            seq = run_recursion(K, m, b0)
        except GronwallAbort:
            aborted += 1
            continue
        valid += 1
        cap = closed_form_cap(K, b0)
        excess = seq.values.max() / cap - 1
        worst = max(worst, excess)
        over += excess > GRONWALL_REL_SLACK
        if replayed < GRONWALL_REPLAY_CASES and m <= 10:
            replayed += 1
            ref = replay_extended(K, m, b0)
            err = max(float(abs((mpmath.mpf(v) - r) / r)) for v, r in zip(seq.values, ref))
            replay_err = max(replay_err, err)
    ok = over == 0 and replay_err <= GRONWALL_REPLAY_TOL
    return report(6, ok, f"{over}/{valid} cap violations (worst relative excess {worst:.3e}), "
                         f"{aborted} aborted draws skipped, replay error {replay_err:.1e} on {replayed}")


def criterion_7():
    worst = 0.0
    ok = True
    for p in BDG_P:
        for n in range(1, BDG_MAX_N + 1):
            r = estimates.bdg_check(p, n)
            ok = ok and r.exact and r.ratio <= p
            worst = max(worst, r.ratio / p)
    return report(7, ok, f"max ratio/p {worst:.4f}")


def criterion_8():
    ok = True
    parts = []
    for family in ("pm", "uniform"):
        for r in EXP_R:
            res = estimates.exp_moment_check(1.0, r, family=family, replicas=EXP_REPLICAS, seed=8, workers=4)
            ok = ok and res.estimate <= 2 + EXP_SE_COUNT * res.se
            parts.append(f"{family} r={r}: {res.estimate:.4f}")
    return report(8, ok, "; ".join(parts))


def criterion_9():
    start = time.perf_counter()
    op = SpectralOperator.power_law(8)
    lip = make_drift("lipschitz", 8, 7.0)
    sign = make_drift("sign", 8, 7.0)
    s_lip = estimates.sigma_scan(lip, op, SCAN_N, SCAN_PATHS, seed=3, workers=4).fitted_slope
    r_lip = estimates.rho_scan(lip, op, SCAN_N, SCAN_PATHS, seed=3, workers=4).fitted_slope
    r_sign = estimates.rho_scan(sign, op, SCAN_N, SCAN_PATHS, seed=3, workers=4).fitted_slope_raw
    elapsed = time.perf_counter() - start
    ok = (s_lip <= -LN2 / 2 + SLOPE_TOL and r_lip <= -5 / 6 * LN2 + SLOPE_TOL
          and r_sign <= -LN2 / 6 + SLOPE_TOL and elapsed < SCAN_SECONDS)
    return report(9, ok, f"lipschitz sigma {s_lip:.3f}, lipschitz rho {r_lip:.3f}, sign rho {r_sign:.3f}; "
                         f"{elapsed:.0f}s")


def criterion_10():
    start = time.perf_counter()
    op = SpectralOperator.power_law(8)
    cfg = MildSolveConfig(steps=1024, tolerance=UNIQ_TOL)
    contraction = DriftSpec.lipschitz(np.log(np.linspace(0.5, 0.125, 8)), shift=0.1)
    runs = {
        "sign": make_drift("sign", 8, 7.0),
        "zero": DriftSpec.zero(8),
        "contraction": contraction,
    }
    frac = {}
    for name, drift in runs.items():
        rep = uniqueness_experiment(drift, op, UNIQ_PATHS, UNIQ_INITS, cfg, seed=10, workers=4)
        close = (rep.nonconverged == 0) & (rep.max_distance < UNIQ_DISTANCE)
        frac[name] = float(np.mean(close))
    elapsed = time.perf_counter() - start
    ok = (frac["sign"] >= UNIQ_FRACTION and frac["zero"] == 1.0 and frac["contraction"] == 1.0
          and elapsed < UNIQ_SECONDS)
    return report(10, ok, ", ".join(f"{k} {v:.2f}" for k, v in frac.items()) + f"; {elapsed:.0f}s")


REPRO_COMMANDS = [
    ("simulate-ou", "--paths", "3", "--grid-steps", "64"),
    ("lattice-stats", "--gamma", "1", "--m", "4-8"),
    ("validate-drift",),
    ("phi-estimate", "--n", "4,6", "--queries", "5"),
    ("sigma-scan", "--n", "4-6", "--replicas", "8"),
    ("rho-scan", "--n", "4-6", "--replicas", "8"),
    ("euler-chain", "--n", "6", "--N", "4", "--replicas", "6"),
    ("bdg-check", "--family", "uniform", "--n", "5,20", "--replicas", "20000"),
    ("exp-moment", "--r", "10", "--replicas", "20000"),
    ("gronwall", "--K", "0.5", "--m", "4", "--beta0", "1e-4"),
    ("solve", "--grid-steps", "128"),
    ("uniqueness", "--paths", "4", "--inits", "2", "--grid-steps", "128"),
]


def _body(argv):
    out = io.StringIO()
    status = run(list(argv), stdout=out)
    return status, [line for line in out.getvalue().splitlines() if not line.startswith("#")]


def criterion_11():
    differing = []
    for argv in REPRO_COMMANDS:
        bodies = [_body((*argv, "--seed", "11", "--workers", str(w))) for w in WORKER_COUNTS]
        if any(b != bodies[0] for b in bodies[1:]) or len(bodies[0][1]) < 2:
            differing.append(argv[0])
    return report(11, not differing, f"{len(REPRO_COMMANDS)} subcommands x workers {WORKER_COUNTS}; "
                                     f"differing: {differing or 'none'}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 12)])
def test_criterion(check, capsys):
    with capsys.disabled():
        ok = check()
    assert ok


if __name__ == "__main__":
    results = [check() for check in CRITERIA]
    sys.exit(0 if all(results) else 1)
