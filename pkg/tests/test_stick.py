import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from levymax.levy import LevyParams, sample_increment
from levymax.stick import (ChiTriple, DrawCounter, sb_pieces, sb_sample, sb_sample_batch,
                           sb_sample_coupled, sb_sample_coupled_batch, shift, stick_partition)

BMG = LevyParams(b=1.0, sigma=0.5, alpha=1.5, beta=2.0)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(1e-3, 1e3), m=st.integers(0, 40), seed=st.integers(0, 2**32 - 1))
def test_partition_conserves_mass(t, m, seed):
    part = stick_partition(t, m, np.random.default_rng(seed))
    assert len(part.lengths) == m
    assert np.all(part.lengths > 0) and part.remainder >= 0
    assert abs(part.horizon - t) <= 1e-12 * t * (m + 1)


def test_partition_recursion():
    rng = np.random.default_rng(3)
    u = np.random.default_rng(3).random(4)
    part = stick_partition(2.0, 4, rng)
    L = 2.0 * np.cumprod(u)
    np.testing.assert_allclose(part.lengths, np.concatenate([[2.0], L[:-1]]) - L)
    assert part.remainder == pytest.approx(L[-1])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(0, 30), t=st.floats(0.01, 10.0),
       b=st.floats(-3, 3), kind=st.sampled_from(["gamma", "inverse_gamma"]))
def test_triple_invariants(seed, m, t, b, kind):
    p = LevyParams(b=b, sigma=0.8, alpha=2.0, beta=1.0, kind=kind)
    tri = sb_sample_batch(p, t, m, 64, np.random.default_rng(seed))
    x, xbar, tau = tri.T
    assert np.all(xbar >= 0) and np.all(xbar >= x - 1e-12)
    assert np.all(tau >= 0) and np.all(tau <= t * (1 + 1e-12))


def test_partial_maxima_nondecreasing(bmg, rng):
    _, xi = sb_pieces(bmg, 1.0, 12, 1000, rng)
    partial = np.cumsum(np.maximum(xi, 0.0), axis=-1)
    assert np.all(np.diff(partial, axis=-1) >= 0)


def test_zero_sticks_uses_whole_horizon(bmg):
    tri = sb_sample(bmg, 1.7, 0, np.random.default_rng(5))
    xi = sample_increment(bmg, 1.7, np.random.default_rng(5))
    assert isinstance(tri, ChiTriple)
    assert tri == (pytest.approx(xi), pytest.approx(max(xi, 0.0)),
                   pytest.approx(1.7 if xi >= 0 else 0.0))


def test_terminal_coordinate_is_exact(bmg):
    sb = sb_sample_batch(bmg, 1.0, 5, 100_000, np.random.default_rng(10))[:, 0]
    direct = sample_increment(bmg, 1.0, np.random.default_rng(11), size=100_000)
    assert stats.ks_2samp(sb, direct).statistic < 0.01


def test_brownian_regime_expected_maximum():
    # alpha*beta = 1 with tiny beta: Z_t is nearly t, so X is close to sigma * W_t
    sigma, t = 0.5, 1.0
    p = LevyParams(b=0.0, sigma=sigma, alpha=1e4, beta=1e-4)
    xbar = sb_sample_batch(p, t, 30, 100_000, np.random.default_rng(2))[:, 1]
    se_sb = xbar.std() / np.sqrt(len(xbar))

    # Euler oracle: subordinated path on a 1e4-step grid, corrected by the
    # known discrete-monitoring bias 0.5826 * sigma * sqrt(dt)
    steps, paths, rng = 10_000, 2_000, np.random.default_rng(3)
    dt = t / steps
    maxima = []
    for _ in range(paths // 250):
        dz = rng.gamma(p.alpha * dt, p.beta, size=(250, steps))
        path = np.cumsum(sigma * np.sqrt(dz) * rng.standard_normal((250, steps)), axis=1)
        maxima.append(np.maximum(path.max(axis=1), 0.0))
    maxima = np.concatenate(maxima)
    euler = maxima.mean() + 0.5826 * sigma * np.sqrt(dt)
    se_euler = maxima.std() / np.sqrt(paths)

    closed_form = sigma * np.sqrt(2 * t / np.pi)
    assert abs(euler - closed_form) < 3 * se_euler
    assert abs(xbar.mean() - euler) < 3 * np.hypot(se_sb, se_euler)
    assert abs(xbar.mean() - closed_form) < 3 * se_sb


def test_coupled_marginals_match_single_level(bmg):
    coarse, fine = sb_sample_coupled_batch(bmg, 1.0, 4, 100_000, np.random.default_rng(20))
    single4 = sb_sample_batch(bmg, 1.0, 4, 100_000, np.random.default_rng(21))
    single5 = sb_sample_batch(bmg, 1.0, 5, 100_000, np.random.default_rng(22))
    for j in range(3):
        assert stats.ks_2samp(coarse[:, j], single4[:, j]).statistic < 0.01
        assert stats.ks_2samp(fine[:, j], single5[:, j]).statistic < 0.01


def test_coupling_error_halves_per_stick(bmg):
    proxy = []
    for m in range(3, 8):
        c, f = sb_sample_coupled_batch(bmg, 1.0, m, 100_000, np.random.default_rng(m))
        proxy.append(np.mean((f[:, 0] - c[:, 0]) ** 2))
    ratios = np.array(proxy[1:]) / np.array(proxy[:-1])
    assert np.all((ratios > 0.4) & (ratios < 0.6)), ratios
    # closed form: two independent remainders over a stick of mean length 2^-m
    assert proxy[0] == pytest.approx(2 * bmg.sigma ** 2 * bmg.clock_mean(1.0) / 2 ** 3,
                                     rel=0.05)


def test_coupled_shares_sticks_up_to_m(bmg):
    # with no noise the triples are deterministic functions of the sticks
    p = LevyParams(b=-1.0, sigma=1e-300)
    c, f = sb_sample_coupled_batch(p, 2.0, 3, 10, np.random.default_rng(0), m_fine=7)
    np.testing.assert_allclose(c[:, 0], -2.0, atol=1e-12)
    np.testing.assert_allclose(f[:, 0], -2.0, atol=1e-12)


def test_degenerate_drift_only_coupling():
    p = LevyParams(b=0.8, sigma=1e-300)
    (c, f) = sb_sample_coupled(p, 1.5, 3, np.random.default_rng(4))
    for tri in (c, f):
        assert tri.x == pytest.approx(1.2, abs=1e-6)
        assert tri.xbar == pytest.approx(1.2, abs=1e-6)


@pytest.mark.parametrize("m,m_fine", [(0, None), (3, 3), (4, 2)])
def test_coupling_rejects_bad_levels(bmg, m, m_fine):
    with pytest.raises(ValueError):
        sb_sample_coupled(bmg, 1.0, m, np.random.default_rng(0), m_fine=m_fine)


def test_draw_counter(bmg):
    counter = DrawCounter()
    sb_sample_batch(bmg, 1.0, 5, (4, 3), np.random.default_rng(0), counter=counter)
    assert counter.draws == 4 * 3 * 6
    sb_sample_coupled_batch(bmg, 1.0, 5, 7, np.random.default_rng(0), m_fine=9,
                            counter=counter)
    assert counter.draws == 72 + 7 * (9 + 2)


def test_shift_examples():
    assert shift(ChiTriple(0.0, 0.0, 0.0), 3.2) == (3.2, 3.2)
    assert shift((-1.0, 0.5, 0.3), 2.0) == (1.0, 2.5)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), origin=st.floats(-100, 100))
def test_shifted_pair_dominates_endpoints(seed, origin):
    x, xbar = shift(sb_sample(BMG, 1.0, 8, np.random.default_rng(seed)), origin)
    assert xbar >= max(origin, x) - 1e-12
