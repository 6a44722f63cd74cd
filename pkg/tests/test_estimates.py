import math

import numpy as np
import pytest

from regnoise import estimates
from regnoise.drift import DriftSpec, make_drift
from regnoise.phi import phi_vector
from regnoise.spectral import SpectralOperator, simulate_ou

OP = SpectralOperator.power_law(8)
LN2 = math.log(2.0)


def test_theta():
    assert estimates.theta(7.0) == pytest.approx(14 / 27, rel=1e-15)
    assert estimates.theta(1.0) == pytest.approx(2 / 9, rel=1e-15)


def test_bound_floors():
    b, neg = estimates.sigma_bound(1, 7.0, 0.0)
    assert b == pytest.approx(2**-0.5 * 0.25, rel=1e-15) and not neg
    b, neg = estimates.sigma_bound(7, 7.0, 0.5)
    assert neg
    # 2^-128 underflows nothing, 2^-(2^11) does
    assert estimates.pow2_floor(-128) == 2.0**-128
    assert estimates.pow2_floor(-(2.0**11)) == 0.0
    b, neg = estimates.rho_bound(4, 7.0, 0.25)
    lead = 2.0 * 2 ** (-4 / 6) * 0.25
    assert b == pytest.approx(lead + 2.0 ** -(2 ** (4 * 14 / 27)), rel=1e-15)


def test_zero_drift_scans_are_zero():
    for scan in (estimates.sigma_scan, estimates.rho_scan):
        rep = scan(DriftSpec.zero(8), OP, [4, 5], 4, seed=1)
        assert np.all(rep.quantiles == 0.0)
        assert math.isnan(rep.fitted_slope)


def test_equal_pair_ratio_zero():
    path = simulate_ou(OP, estimates.scan_grid([4]), seed=0)
    x = np.array([0.01, 0, 0, 0, 0, 0, 0, 0])
    assert np.linalg.norm(phi_vector(make_drift("sign", 8, 7.0), path, 4, 3, x, x)) == 0.0


def test_quantiles_nondecreasing():
    rep = estimates.rho_scan(make_drift("sign", 8, 7.0), OP, [4, 5, 6], 20, seed=2)
    assert np.all(np.diff(rep.quantiles, axis=1) >= 0)
    assert rep.theta == estimates.theta(7.0) and rep.beta_A == 1.0


def test_lipschitz_sigma_slope():
    rep = estimates.sigma_scan(make_drift("lipschitz", 8, 7.0), OP, range(4, 11), 40, seed=3)
    assert rep.fitted_slope <= -LN2 / 2 + 0.05


def test_lipschitz_rho_slope():
    rep = estimates.rho_scan(make_drift("lipschitz", 8, 7.0), OP, range(4, 11), 40, seed=3)
    assert rep.fitted_slope <= -5 / 6 * LN2 + 0.05


def test_scan_rejects_empty_sample():
    with pytest.raises(ValueError):
        estimates.sigma_scan(DriftSpec.zero(8), OP, [4], 0)


def test_scan_worker_independent():
    d = make_drift("sign", 8, 7.0)
    a = estimates.sigma_scan(d, OP, [4, 6], 12, seed=5, workers=1)
    b = estimates.sigma_scan(d, OP, [4, 6], 12, seed=5, workers=4)
    np.testing.assert_array_equal(a.quantiles, b.quantiles)


PATH8 = simulate_ou(OP, estimates.scan_grid([8]), seed=1)
X0 = np.array([0.05, 0, 0, 0, 0, 0, 0, 0])


def test_chain_trivial_cases():
    zero = estimates.euler_chain(DriftSpec.zero(8), OP, PATH8, 8, 3, 4, X0)
    assert np.all(zero.points == X0)
    empty = estimates.euler_chain(make_drift("sign", 8, 7.0), OP, PATH8, 8, 3, 0, X0)
    assert empty.points.shape == (1, 8)
    const = estimates.euler_chain(make_drift("constant", 8, 7.0), OP, PATH8, 8, 0, 4, X0)
    assert np.all(const.points == X0)


def test_chain_regime_and_overflow():
    d = make_drift("sign", 8, 7.0)
    with pytest.raises(ValueError, match="2\\^\\(n/4\\)"):
        estimates.euler_chain(d, OP, PATH8, 8, 0, 5, X0)
    estimates.euler_chain(d, OP, PATH8, 8, 0, 5, X0, enforce_regime=False)
    with pytest.raises(ValueError, match="overflow"):
        estimates.euler_chain(d, OP, PATH8, 8, 252, 4, X0)


def test_chain_sum_zero_drift_undefined_constant():
    chain = estimates.euler_chain(DriftSpec.zero(8), OP, PATH8, 8, 0, 4, X0)
    rep = estimates.chain_sum_estimate(DriftSpec.zero(8), PATH8, 8, 0, chain)
    assert rep.left == 0.0 and rep.implied_constant == 0.0
    # with x = 0 only the floor N 2^{-2^{theta n}} remains, still positive at n = 8
    rep0 = estimates.chain_sum_estimate(DriftSpec.zero(8), PATH8, 8, 0, np.zeros((5, 8)))
    assert rep0.left == 0.0 and rep0.term_x == rep0.term_x0 == rep0.term_error == 0.0
    assert rep0.bracket == rep0.term_floor == 4 * 2.0 ** -(2 ** (8 * 14 / 27))
    # once the floor underflows both sides vanish and the constant is undefined
    both_zero = estimates.ChainSumReport(0.0, 0.0, 0.0, 0.0, 0.0, True, rep0.phis, rep0.errors)
    assert math.isnan(both_zero.implied_constant)


def test_chain_sum_reproduces_chain_phis():
    d = make_drift("sign", 8, 7.0)
    chain = estimates.euler_chain(d, OP, PATH8, 8, 10, 4, X0)
    rep = estimates.chain_sum_estimate(d, PATH8, 8, 10, chain)
    np.testing.assert_array_equal(rep.phis, chain.phis)
    assert np.all(rep.errors == 0.0)


def test_chain_sum_lipschitz_accounting():
    d = make_drift("lipschitz", 8, 1.0, amplitude=3.0)
    L = float(np.max(d.scale))
    gen = np.random.default_rng(0)
    for rep_i in range(10):
        path = simulate_ou(OP, estimates.scan_grid([8]), seed=2, replica=rep_i)
        x0 = gen.normal(size=8)
        chain = estimates.euler_chain(d, OP, path, 8, 0, 64, x0, enforce_regime=False)
        rep = estimates.chain_sum_estimate(d, path, 8, 0, chain)
        steps = np.linalg.norm(np.diff(chain.points, axis=0), axis=1).sum()
        assert rep.left <= L * 2.0**-8 * steps * (1 + 1e-12)
        assert rep.implied_constant <= 2 * L


def test_chain_sum_rejects_long_chains():
    with pytest.raises(ValueError):
        estimates.chain_sum_estimate(DriftSpec.zero(8), PATH8, 2, 0, np.zeros((6, 8)))


def test_chain_constant_stable_across_levels():
    """Measured: 99% quantile of the implied constant within a factor 3 for n in {6, 8, 10}."""
    d = make_drift("sign", 8, 7.0)
    q99 = []
    for n in (6, 8, 10):
        big_n = min(64, 2**n - 1)
        reps = estimates.chain_sum_scan(d, OP, n, big_n, 200, seed=0, workers=4)
        c = np.array([r.implied_constant for r in reps])
        q99.append(np.quantile(c[np.isfinite(c)], 0.99))
    print("chain constant q99 by level:", q99)
    assert max(q99) / min(q99) <= 3.0


def test_bdg_examples():
    r = estimates.bdg_check(2, 4)
    assert r.exact and r.lhs == 2.0 and r.rhs == 2.0 and r.ratio == 1.0
    for p in (2, 3.5, 8):
        assert estimates.bdg_check(p, 1).ratio == 1.0
    assert estimates.bdg_check(4, 12).ratio <= 4


def test_bdg_enumeration_matches_binomial():
    from math import comb

    n, p = 10, 4
    moment = sum(comb(n, j) * abs(2 * j - n) ** p for j in range(n + 1)) / 2**n
    assert estimates.bdg_check(p, n).lhs == pytest.approx(moment ** (1 / p), rel=1e-14)


def test_bdg_monte_carlo():
    r = estimates.bdg_check(4, 30, family="uniform", replicas=20_000, seed=1)
    assert not r.exact and r.ratio <= 4
    with pytest.raises(ValueError):
        estimates.bdg_check(1.5, 4)


def test_exp_moment_zero_family():
    r = estimates.exp_moment_check(1.0, 10, family="zero", replicas=1000)
    assert r.estimate == 1.0 and r.se == 0.0


def test_exp_moment_two_point():
    r = estimates.exp_moment_check(2.0, 1, family="pm", replicas=100_000, seed=3)
    exact = 0.5 * (1 + math.exp(1 / 8))
    assert exact == pytest.approx(1.0666, abs=5e-5)
    assert abs(r.estimate - exact) <= 4 * r.se


def test_exp_moment_uniform():
    r = estimates.exp_moment_check(1.0, 100, family="uniform", replicas=100_000, seed=4)
    assert r.estimate <= 2 + 3 * r.se
    assert r.estimate_abs >= r.estimate


def test_exp_moment_rejects_uncertified():
    with pytest.raises(ValueError):
        estimates.exp_moment_check(1.0, 10, family="gaussian")


def test_exp_moment_worker_independent():
    a = estimates.exp_moment_check(1.0, 10, replicas=30_000, seed=8, workers=1)
    b = estimates.exp_moment_check(1.0, 10, replicas=30_000, seed=8, workers=4)
    assert a == b
