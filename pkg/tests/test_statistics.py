import math

import numpy as np
import pytest

from oracles import exact_core_sums
from jumpheston.errors import DegenerateStats, NonpositivePath
from jumpheston.estimator import build_G
from jumpheston.model import JumpSpec, NormalJumps, reference_params
from jumpheston.rng import substream
from jumpheston.simulate import (
    PathBundle,
    SimGrid,
    cumulative_log_return,
    simulate_cir,
    simulate_path,
    wiener_increments,
)
from jumpheston.statistics import (
    I3Variant,
    I45Variant,
    SuffStats,
    integrals_core,
    integrals_price,
    integrals_wiener,
    realized_sigma_rho,
    suff_stats,
)


def coarsen(dw_fine, factor):
    return dw_fine.reshape(-1, factor).sum(axis=1)


# ---------------------------------------------------------------- core integrals


def test_constant_path_is_degenerate():
    g = SimGrid(7.0, 70)
    c = 1.7
    core = integrals_core(np.full(71, c), g, 0.2)
    assert core.i1 == pytest.approx(c * 7.0, rel=1e-15)
    assert core.i2 == pytest.approx(7.0 / c, rel=1e-15)
    assert core.i3 == 0.0
    assert core.i1 * core.i2 == pytest.approx(7.0**2, rel=1e-15)
    # exact-arithmetic values put the gap at zero, where the estimator refuses
    stats = SuffStats(T=8.0, y0=2.0, y_terminal=2.0, i1=16.0, i2=4.0, i3=0.0, i4=0.0, i5=0.0)
    assert stats.cs_gap == 0.0
    with pytest.raises(DegenerateStats):
        build_G(stats, 0.2, 0.5)
    rounded = SuffStats(T=7.0, y0=c, y_terminal=c, i1=core.i1, i2=core.i2, i3=0.0, i4=0.0, i5=0.0)
    with pytest.raises(DegenerateStats):
        build_G(rounded, 0.2, 0.5)


def test_exponential_path_integrals():
    # Y = exp(t) on [0, 1]: int dY/Y = 1, int Y = e - 1, int 1/Y = 1 - 1/e
    def core(n):
        g = SimGrid(1.0, n)
        return integrals_core(np.exp(g.times), g, 0.2)

    c = core(10_000)
    assert c.i3 == pytest.approx(1.0, abs=1e-4)
    assert c.i1 == pytest.approx(math.e - 1, abs=2e-4)
    assert c.i2 == pytest.approx(1 - 1 / math.e, abs=1e-4)
    # left-point sums are first order; Richardson extrapolation removes the leading term
    half = core(20_000)
    assert 2 * half.i1 - c.i1 == pytest.approx(math.e - 1, abs=1e-8)
    assert 2 * half.i2 - c.i2 == pytest.approx(1 - 1 / math.e, abs=1e-8)
    assert 2 * half.i3 - c.i3 == pytest.approx(1.0, abs=1e-8)


def test_core_sums_match_rational_oracle():
    p = reference_params(sigma=0.6)
    g = SimGrid(1.0, 100)
    for k in range(100):
        y = simulate_cir(p, g, wiener_increments(substream(1, k), g))
        core = integrals_core(y, g, p.sigma)
        i1, i2, i3 = exact_core_sums(y, g.dt)
        assert core.i1 == pytest.approx(i1, rel=4e-16)
        assert core.i2 == pytest.approx(i2, rel=4e-16)
        assert core.i3 == pytest.approx(i3, rel=4e-16, abs=1e-300)


def test_core_is_order_independent():
    # exact rounding makes the sum independent of the order of the terms
    rng = np.random.default_rng(2)
    y = np.exp(rng.normal(0, 3, 100_001))
    g = SimGrid(1.0, 100_000)
    a = integrals_core(y, g, 0.2)
    perm = np.concatenate([rng.permutation(y[:-1]), y[-1:]])
    b = integrals_core(perm, g, 0.2)
    assert a.i1 == b.i1 and a.i2 == b.i2


def test_cauchy_schwarz_gap_strict_on_cir_paths():
    p = reference_params()
    g = SimGrid(10.0, 1000)
    for k in range(50):
        y = simulate_cir(p, g, wiener_increments(substream(3, k), g))
        c = integrals_core(y, g, p.sigma)
        assert c.i1 * c.i2 > g.T**2


def test_ito_variant_converges_to_increment_sum():
    p = reference_params(sigma=0.6)
    fine = SimGrid(1.0, 10_000)
    gaps = {1: [], 10: [], 100: []}
    for k in range(20):
        dw = wiener_increments(substream(4, k), fine)
        for factor in gaps:
            g = SimGrid(1.0, fine.n // factor)
            y = simulate_cir(p, g, coarsen(dw, factor))
            c = integrals_core(y, g, p.sigma)
            gaps[factor].append(abs(c.i3_tilde - c.i3))
    m = {f: np.mean(v) for f, v in gaps.items()}
    assert m[100] > m[10] > m[1]


def test_nonpositive_rejected():
    g = SimGrid(1.0, 3)
    with pytest.raises(NonpositivePath):
        integrals_core(np.array([1.0, 0.5, 0.0, 1.0]), g, 0.2)
    with pytest.raises(NonpositivePath):
        integrals_wiener(reference_params(), g, np.array([1.0, -0.5, 1.0, 1.0]), np.zeros(3), np.zeros(3))
    with pytest.raises(NonpositivePath):
        integrals_price(g, np.array([1.0, 1.0, 1.0, 1.0]), np.zeros(3), s=np.array([1.0, 0.0, 1.0, 1.0]))


def test_core_rejects_wrong_length():
    with pytest.raises(ValueError):
        integrals_core(np.ones(5), SimGrid(1.0, 5), 0.2)


# ---------------------------------------------------------------- Wiener-based i4, i5


def test_wiener_integrals_without_noise():
    p = reference_params()
    g = SimGrid(3.0, 300)
    y = 1.0 + np.random.default_rng(5).random(301)
    z = np.zeros(300)
    i2 = g.dt * np.sum(1 / y[:-1])
    i4, i5 = integrals_wiener(p, g, y, z, z)
    assert i4 == pytest.approx(p.mu * g.T, rel=1e-15)
    assert i5 == pytest.approx(p.mu * i2, rel=1e-13)


def test_wiener_integrals_ignore_dW_without_correlation():
    p = reference_params(rho=0.0)
    g = SimGrid(1.0, 100)
    rng = np.random.default_rng(6)
    y, dB = 1.0 + rng.random(101), rng.normal(0, 0.1, 100)
    a = integrals_wiener(p, g, y, rng.normal(0, 0.1, 100), dB)
    b = integrals_wiener(p, g, y, rng.normal(0, 0.1, 100), dB)
    assert a == b


def test_i4_mean():
    p = reference_params()
    g = SimGrid(1.0, 100)
    dW = np.stack([wiener_increments(substream(7, k), g) for k in range(10_000)])
    dB = np.stack([wiener_increments(substream(7, k, purpose=1), g) for k in range(10_000)])
    y = simulate_cir(p, g, dW)
    i4 = np.array([integrals_wiener(p, g, y[k], dW[k], dB[k])[0] for k in range(10_000)])
    assert abs(i4.mean() - p.mu * g.T) < 4 * i4.std() / 100


# ---------------------------------------------------------------- price-based i4, i5


def test_price_integrals_smooth_path():
    mu, y0 = 0.3, 1.5
    errs = []
    for n in (100, 1000, 10_000):
        g = SimGrid(2.0, n)
        s = 100.0 * np.exp(mu * g.times)
        i4, i5 = integrals_price(g, np.full(n + 1, y0), np.zeros(n), s=s)
        errs.append((abs(i4 - mu * g.T), abs(i5 - mu * g.T / y0)))
    assert errs[-1][0] < 1e-4 and errs[-1][1] < 1e-4
    assert errs[0][0] > errs[1][0] > errs[2][0]


def test_price_integrals_cancel_jumps():
    g = SimGrid(10.0, 1000)
    rng = np.random.default_rng(8)
    steps = rng.choice(1000, 12, replace=False)
    J = np.zeros(1000)
    J[steps] = rng.normal(0, 0.2, 12)
    log_ret = np.concatenate([[0.0], np.cumsum(J)])
    y = 0.5 + rng.random(1001)
    i4, i5 = integrals_price(g, y, np.expm1(J), log_s=log_ret)
    assert abs(i4) < 1e-15 and abs(i5) < 1e-14


def test_price_integrals_from_s_and_log_s_agree():
    b = simulate_path(reference_params(), SimGrid(10.0, 1000), substream(9, 0))
    a = integrals_price(b.grid, b.y, b.dL, s=b.s)
    c = integrals_price(b.grid, b.y, b.dL, log_s=b.log_s)
    np.testing.assert_allclose(a, c, rtol=1e-10)


def test_price_integrals_need_a_price():
    with pytest.raises(ValueError):
        integrals_price(SimGrid(1.0, 2), np.ones(3), np.zeros(2))


def test_price_and_wiener_variants_converge():
    p = reference_params(jump=JumpSpec(intensity=0.0))
    fine = SimGrid(1.0, 10_000)
    gaps = {1: [], 10: [], 100: []}
    for k in range(20):
        r = substream(10, k)
        dw, db = wiener_increments(r, fine), wiener_increments(r, fine)
        for factor in gaps:
            g = SimGrid(1.0, fine.n // factor)
            cw, cb = coarsen(dw, factor), coarsen(db, factor)
            y = simulate_cir(p, g, cw)
            zero = np.zeros(g.n)
            bundle = PathBundle(grid=g, y=y, dW=cw, dB=cb, jump_sums=zero, dL=zero, s0=p.s0,
                                log_return=cumulative_log_return(p, g, y, cw, cb, zero))
            sw = suff_stats(p, bundle, i45_variant=I45Variant.WIENER)
            sp = suff_stats(p, bundle, i45_variant=I45Variant.PRICE)
            gaps[factor].append(abs(sw.i4 - sp.i4))
    m = {f: np.mean(v) for f, v in gaps.items()}
    assert m[100] > m[10] > m[1]


# ---------------------------------------------------------------- realized covariation


def test_realized_sigma_rho_symmetric_and_uncorrelated():
    p = reference_params(rho=0.0)
    offdiag = []
    for k in range(20):
        b = simulate_path(p, SimGrid(10.0, 10_000), substream(11, k))
        m = realized_sigma_rho(b.grid, b.y, b.log_s, b.jump_sums)
        assert m[0, 1] == m[1, 0]
        offdiag.append(m[0, 1])
    # rho*sigma estimate scatter is about sigma/sqrt(n) per path
    assert abs(np.mean(offdiag)) < 4 * 0.2 / math.sqrt(10_000 * 20)


def test_realized_sigma_rho_without_jump_correction_overshoots():
    p = reference_params(jump=JumpSpec(intensity=5.0, size_law=NormalJumps(0.0, 0.3)))
    b = simulate_path(p, SimGrid(10.0, 10_000), substream(12, 0))
    with_corr = realized_sigma_rho(b.grid, b.y, b.log_s, b.jump_sums)
    without = realized_sigma_rho(b.grid, b.y, b.log_s, np.zeros(b.grid.n))
    assert without[1, 1] > with_corr[1, 1] + 0.1
    assert with_corr[1, 1] == pytest.approx(1.0, abs=0.1)


# ---------------------------------------------------------------- assembly


def test_suff_stats_variants():
    p = reference_params()
    b = simulate_path(p, SimGrid(20.0, 2000), substream(13, 0))
    s = suff_stats(p, b)
    assert s.i3_variant is I3Variant.INCREMENT and s.i45_variant is I45Variant.WIENER
    assert s.i3 == s.i3_increment
    t = suff_stats(p, b, I3Variant.ITO_LOG, I45Variant.PRICE)
    assert t.i3 == s.i3_tilde and t.i45_variant is I45Variant.PRICE
    assert s.with_i3("i3-tilde").i3 == t.i3
    assert s.dY == b.y[-1] - b.y[0]
    assert s.T == 20.0 and s.i1 > 0 and s.i2 > 0


def test_suff_stats_price_variant_needs_price():
    p = reference_params()
    b = simulate_path(p, SimGrid(1.0, 100), substream(14, 0), with_price=False)
    with pytest.raises(ValueError):
        suff_stats(p, b, i45_variant="price")


def test_with_i3_needs_value():
    s = SuffStats(T=1.0, y0=1.0, y_terminal=1.0, i1=1.0, i2=2.0, i3=0.0, i4=0.0, i5=0.0)
    with pytest.raises(ValueError):
        s.with_i3(I3Variant.ITO_LOG)
