import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from levymax.levy import LevyParams, Subordinator, sample_clock, sample_increment


def gamma_mixture_cdf(params, t, x):
    """CDF of b t + sigma sqrt(Z) g by integrating the normal CDF against Z's density."""
    clock = stats.gamma(params.alpha * t, scale=params.beta)

    def integrand(z, xv):
        return stats.norm.cdf((xv - params.b * t) / (params.sigma * np.sqrt(z))) * clock.pdf(z)

    hi = clock.ppf(1 - 1e-13)
    return np.array([integrate.quad(integrand, 0, hi, args=(xv,), limit=200,
                                    epsabs=1e-10)[0] for xv in x])


@pytest.mark.parametrize("kind", list(Subordinator))
def test_vanishing_sigma_leaves_drift(kind, rng):
    p = LevyParams(b=1.0, sigma=1e-300, kind=kind)
    draws = sample_increment(p, 1.0, rng, size=100)
    np.testing.assert_allclose(draws, 1.0, atol=1e-6)


def test_gamma_moments():
    p = LevyParams(b=0.0, sigma=0.5)
    x = sample_increment(p, 1.0, np.random.default_rng(1), size=1_000_000)
    n = len(x)
    assert abs(x.mean()) < 3 * x.std() / np.sqrt(n)
    var_true = p.sigma ** 2 * p.clock_mean(1.0)
    assert var_true == pytest.approx(0.75)
    # standard error of the sample variance from the fourth central moment
    m4 = np.mean((x - x.mean()) ** 4)
    se_var = np.sqrt((m4 - x.var() ** 2) / n)
    assert abs(x.var() - var_true) < 3 * se_var


def test_gamma_cdf_matches_quadrature(rng, bmg):
    x = np.sort(sample_increment(bmg, 1.0, rng, size=100_000))
    grid = np.linspace(x[0], x[-1], 600)
    cdf = np.interp(x, grid, gamma_mixture_cdf(bmg, 1.0, grid))
    ecdf_hi = np.arange(1, len(x) + 1) / len(x)
    ks = max(np.max(ecdf_hi - cdf), np.max(cdf - (ecdf_hi - 1 / len(x))))
    assert ks < 0.01


def test_gamma_additivity(bmg):
    rng = np.random.default_rng(7)
    s, t = 0.3, 0.7
    summed = sample_increment(bmg, s, rng, size=100_000) + sample_increment(bmg, t, rng,
                                                                            size=100_000)
    direct = sample_increment(bmg, s + t, rng, size=100_000)
    assert stats.ks_2samp(summed, direct).pvalue > 1e-3


def test_inverse_gamma_clock_marginal(rng):
    p = LevyParams(b=0.0, sigma=1.0, alpha=2.5, beta=0.8, kind=Subordinator.INVERSE_GAMMA)
    z = sample_clock(p, 0.4, rng, size=50_000)
    ref = stats.invgamma(p.alpha, scale=p.beta * 0.4)
    assert stats.kstest(z, ref.cdf).statistic < 0.01
    assert p.clock_mean(0.4) == pytest.approx(ref.mean())


@pytest.mark.parametrize("kind", list(Subordinator))
def test_sigma_scaling(kind):
    c = 3.0
    base = LevyParams(b=0.4, sigma=0.5, kind=kind)
    scaled = LevyParams(b=0.4, sigma=0.5 * c, kind=kind)
    a = c * (sample_increment(base, 1.0, np.random.default_rng(1), size=50_000) - 0.4)
    b = sample_increment(scaled, 1.0, np.random.default_rng(2), size=50_000) - 0.4
    assert stats.ks_2samp(a, b).pvalue > 1e-3


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.floats(1e-6, 50.0),
       kind=st.sampled_from(list(Subordinator)))
def test_determinism_per_seed(seed, t, kind):
    p = LevyParams(b=-0.3, sigma=0.7, kind=kind)
    a = sample_increment(p, t, np.random.default_rng(seed), size=8)
    b = sample_increment(p, t, np.random.default_rng(seed), size=8)
    assert np.array_equal(a, b)


def test_scalar_draw_is_float(rng, bmg):
    assert isinstance(sample_increment(bmg, 2.0, rng), float)


@pytest.mark.parametrize("t", [0.0, -1.0, np.nan])
def test_nonpositive_horizon_rejected(t, rng, bmg):
    with pytest.raises(ValueError, match="horizon"):
        sample_increment(bmg, t, rng)


@pytest.mark.parametrize("field,value", [("sigma", 0.0), ("alpha", -1.0), ("beta", np.inf),
                                         ("b", np.nan)])
def test_invalid_parameters_rejected(field, value):
    kwargs = dict(b=1.0, sigma=0.5, alpha=1.5, beta=2.0)
    kwargs[field] = value
    with pytest.raises(ValueError, match=field):
        LevyParams(**kwargs)


def test_nonfinite_draw_names_parameter(rng):
    # a vanishing shape makes every Gamma(alpha) denominator underflow to zero
    p = LevyParams(b=0.0, sigma=1.0, alpha=1e-300, kind=Subordinator.INVERSE_GAMMA)
    with pytest.raises(ValueError, match="alpha"):
        sample_increment(p, 1.0, rng, size=10)


def test_kind_accepts_string():
    assert LevyParams(0.0, 1.0, kind="inverse_gamma").kind is Subordinator.INVERSE_GAMMA
