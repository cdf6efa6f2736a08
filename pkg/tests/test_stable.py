import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from stablegm.stable import (
    PSI1,
    EstimationWarning,
    StableParams,
    aggregate,
    alpha_from_log_variance,
    beta_from_theta,
    char_function,
    closed_form_cdf,
    closed_form_pdf,
    destandardize,
    estimate,
    estimate_alpha,
    estimate_gamma,
    estimate_theta,
    flom_constant,
    make_rng,
    sample,
    scale_shift,
    standardize,
    tail_asymptote,
    tail_constant,
)

alphas = st.floats(0.2, 2.0)
betas = st.floats(-1.0, 1.0)
gammas = st.floats(0.05, 20.0)
mus = st.floats(-50.0, 50.0)
scales = st.floats(0.05, 20.0).flatmap(lambda c: st.sampled_from([c, -c]))


@st.composite
def params(draw, alpha=alphas):
    return StableParams(draw(alpha), draw(betas), draw(gammas), draw(mus))


def close(a: StableParams, b: StableParams, tol=1e-12):
    assert a.alpha == b.alpha
    assert b.beta == pytest.approx(a.beta, abs=tol)
    assert b.gamma == pytest.approx(a.gamma, rel=tol)
    assert b.mu == pytest.approx(a.mu, rel=tol, abs=tol * max(1.0, abs(a.mu)))


class TestParams:
    @pytest.mark.parametrize(
        "kw",
        [dict(alpha=0.0), dict(alpha=2.1), dict(alpha=1.0, beta=1.5), dict(alpha=1.0, gamma=0.0),
         dict(alpha=1.0, mu=math.inf)],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            StableParams(**kw)

    def test_theta(self):
        p = StableParams(1.4, 0.9)
        assert p.theta == pytest.approx(math.atan(0.9 * math.tan(0.7 * math.pi)))
        assert StableParams(2.0, 1.0).theta == 0.0

    def test_beta_from_theta_inverts(self):
        p = StableParams(1.4, 0.3)
        assert beta_from_theta(p.theta, 1.4) == pytest.approx(0.3)


class TestScaleShift:
    def test_identity(self):
        p = StableParams(1.5, 0.5, 2.0, 1.0)
        assert scale_shift(p, 1.0, 0.0) == p

    def test_negation(self):
        assert scale_shift(StableParams(1.5, 0.5, 2.0, 1.0), -1.0, 0.0) == StableParams(1.5, -0.5, 2.0, -1.0)

    def test_alpha_one_branch(self):
        q = scale_shift(StableParams(1.0, 1.0, 1.0, 0.0), math.e, 0.0)
        assert q.beta == 1.0
        assert q.gamma == pytest.approx(math.e)
        assert q.mu == pytest.approx(math.e * (0.0 - 2.0 / math.pi), rel=1e-15)

    def test_zero_scale_rejected(self):
        with pytest.raises(ValueError):
            scale_shift(StableParams(1.0), 0.0, 1.0)

    @settings(max_examples=200, deadline=None)
    @given(p=params(), c=scales, d=mus)
    def test_round_trip(self, p, c, d):
        back = scale_shift(scale_shift(p, c, d), 1.0 / c, -d / c)
        close(p, back, 1e-10)

    @settings(max_examples=100, deadline=None)
    @given(p=params(alpha=st.just(1.0)), c=scales, d=mus)
    def test_round_trip_alpha_one(self, p, c, d):
        close(p, scale_shift(scale_shift(p, c, d), 1.0 / c, -d / c), 1e-10)

    def test_matches_char_function(self):
        # law of cX+d read off the transformed characteristic function
        for p in (StableParams(1.3, 0.4, 0.7, 0.2), StableParams(1.0, -0.6, 1.5, 0.3)):
            c, d = -2.5, 1.2
            q = scale_shift(p, c, d)
            for t in (-1.7, -0.3, 0.4, 2.2):
                lhs = char_function(t * c, p) * np.exp(1j * t * d)
                assert abs(lhs - char_function(t, q)) < 1e-12


class TestAggregate:
    def test_symmetric(self):
        assert aggregate(StableParams(1.2), StableParams(1.2)) == StableParams(1.2, 0.0, 2.0, 0.0)

    def test_opposite_skews(self):
        assert aggregate(StableParams(1.2, 1.0, 1.0, 2.0), StableParams(1.2, -1.0, 1.0, 3.0)) == StableParams(
            1.2, 0.0, 2.0, 5.0
        )

    def test_weighted_skew(self):
        assert aggregate(StableParams(0.7, 1.0, 3.0), StableParams(0.7, 0.0, 1.0)) == StableParams(0.7, 0.75, 4.0)

    def test_alpha_mismatch(self):
        with pytest.raises(ValueError):
            aggregate(StableParams(1.2), StableParams(1.3))

    @settings(max_examples=150, deadline=None)
    @given(a=params(alpha=st.just(1.3)), b=params(alpha=st.just(1.3)), c=params(alpha=st.just(1.3)))
    def test_commutative_associative(self, a, b, c):
        close(aggregate(a, b), aggregate(b, a), 1e-12)
        close(aggregate(aggregate(a, b), c), aggregate(a, aggregate(b, c)), 1e-12)
        assert aggregate(a, b).gamma == a.gamma + b.gamma

    def test_matches_char_function(self):
        a, b = StableParams(1.6, 0.3, 0.5, 1.0), StableParams(1.6, -0.8, 2.0, -0.5)
        s = aggregate(a, b)
        for t in (-2.0, -0.5, 0.7, 3.0):
            assert abs(char_function(t, a) * char_function(t, b) - char_function(t, s)) < 1e-12


class TestStandardize:
    def test_standard_law_unchanged(self):
        x = np.array([-1.5, 0.0, 2.0])
        assert np.array_equal(standardize(x, StableParams(1.3, 0.4)).values, x)

    def test_location_maps_to_zero(self):
        assert standardize([8.0], StableParams(2.0, 0.0, 4.0, 8.0)).values[0] == 0.0

    def test_alpha_one(self):
        v = standardize([0.0], StableParams(1.0, 1.0, math.e, 0.0)).values[0]
        assert v == pytest.approx(-2.0 / math.pi, rel=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(p=st.one_of(params(), params(alpha=st.just(1.0))),
           x=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20))
    def test_round_trip(self, p, x):
        back = destandardize(standardize(x, p))
        np.testing.assert_allclose(back, x, rtol=1e-12, atol=1e-12 * (1 + abs(p.mu)) * 1e3)

    def test_standardized_draws_follow_standard_law(self):
        p = StableParams(1.0, 0.7, 3.0, -2.0)
        z = standardize(sample(p, 50_000, 11), p).values
        ref = sample(StableParams(1.0, 0.7), 50_000, 12)
        assert stats.ks_2samp(z, ref).statistic < 0.015


class TestSampler:
    def test_deterministic(self):
        p = StableParams(1.3, 0.5, 2.0, 1.0)
        assert np.array_equal(sample(p, 100, 5), sample(p, 100, 5))
        assert not np.array_equal(sample(p, 100, 5), sample(p, 100, 6))

    def test_generator_passthrough(self):
        rng = make_rng(3)
        assert make_rng(rng) is rng

    @pytest.mark.parametrize(
        "family,p",
        [("levy", StableParams(0.5, 1.0, 1.0, 0.0)), ("cauchy", StableParams(1.0, 0.0, 1.0, 0.0)),
         ("normal", StableParams(2.0, 0.0, 0.5, 0.0))],
    )
    def test_ks_closed_forms(self, family, p):
        x = sample(p, 100_000, 2024)
        d = stats.kstest(x, lambda v: closed_form_cdf(family, v, p)).statistic
        assert d < 0.01

    def test_normal_variance(self):
        x = sample(StableParams(2.0, 0.0, 0.5, 0.0), 100_000, 1)
        assert np.var(x) == pytest.approx(1.0, rel=0.02)

    def test_cauchy_quartiles(self):
        x = sample(StableParams(1.0), 100_000, 3)
        q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
        assert abs(med) < 0.02
        assert q1 == pytest.approx(-1.0, abs=0.03)
        assert q3 == pytest.approx(1.0, abs=0.03)

    def test_levy_support(self):
        assert np.all(sample(StableParams(0.5, 1.0), 10_000, 4) > 0)

    @pytest.mark.parametrize("alpha,beta", [(0.6, 0.3), (1.0, -0.5), (1.5, 0.9), (1.9, -0.2)])
    def test_matches_scipy(self, alpha, beta):
        # scipy's S1 parametrization uses scale = gamma**(1/alpha)
        p = StableParams(alpha, beta, 1.7, 0.4)
        x = sample(p, 20_000, 9)
        ref = stats.levy_stable(alpha, beta, loc=0.4, scale=1.7 ** (1 / alpha))
        ref.dist.parameterization = "S1"
        y = ref.rvs(20_000, random_state=np.random.default_rng(1))
        assert stats.ks_2samp(x, y).statistic < 0.02

    @pytest.mark.parametrize("alpha,beta", [(0.8, 0.0), (0.8, 0.5), (1.2, 0.0), (1.2, 0.5)])
    def test_tails(self, alpha, beta):
        p = StableParams(alpha, beta, 1.0, 0.0)
        x = sample(p, 1_000_000, 77)
        t = np.quantile(x, 0.999)
        ratio = np.mean(x > t) * t ** alpha / tail_constant(alpha)
        assert (1 + beta) * 0.8 <= ratio <= (1 + beta) * 1.2


class TestClosedForms:
    def test_values(self):
        assert closed_form_pdf("cauchy", 0.0, StableParams(1.0)) == pytest.approx(1 / math.pi)
        g = 0.8
        assert closed_form_pdf("normal", 1.5, StableParams(2.0, 0.0, g, 1.5)) == pytest.approx(
            1 / (2 * math.sqrt(math.pi * g))
        )
        assert closed_form_pdf("levy", -0.1, StableParams(0.5, 1.0)) == 0.0
        assert closed_form_pdf("levy", 0.0, StableParams(0.5, 1.0)) == 0.0

    @pytest.mark.parametrize(
        "family,p", [("levy", StableParams(0.5, 1.0, 1.3, 0.2)), ("cauchy", StableParams(1.0, 0.0, 0.6, -1.0)),
                     ("normal", StableParams(2.0, 0.0, 0.9, 0.5))]
    )
    def test_pdf_integrates_to_cdf(self, family, p):
        lo = p.mu if family == "levy" else -np.inf
        for x in (p.mu + 0.5, p.mu + 3.0):
            val, _ = integrate.quad(lambda v: closed_form_pdf(family, v, p), lo, x, limit=200)
            assert val == pytest.approx(closed_form_cdf(family, x, p), abs=1e-7)

    def test_family_mismatch(self):
        with pytest.raises(ValueError):
            closed_form_pdf("cauchy", 0.0, StableParams(1.5))


class TestTails:
    def test_cauchy(self):
        assert tail_constant(1.0) == pytest.approx(1 / math.pi)
        assert tail_asymptote(StableParams(1.0), 1e3) == pytest.approx(1 / (math.pi * 1e3))
        exact = 0.5 - math.atan(1e4) / math.pi
        assert tail_asymptote(StableParams(1.0), 1e4) == pytest.approx(exact, rel=1e-6)

    def test_fully_left_skewed(self):
        assert tail_asymptote(StableParams(1.5, -1.0), 10.0) == 0.0

    def test_levy(self):
        c = special.gamma(0.5) * math.sin(math.pi / 4) / math.pi
        assert tail_asymptote(StableParams(0.5, 1.0), 100.0) == pytest.approx(2 * c * 0.1)
        exact = 1 - closed_form_cdf("levy", 1e6, StableParams(0.5, 1.0))
        assert tail_asymptote(StableParams(0.5, 1.0), 1e6) == pytest.approx(exact, rel=1e-3)

    def test_gaussian_rejected(self):
        with pytest.raises(ValueError):
            tail_asymptote(StableParams(2.0), 1.0)


class TestFlomConstant:
    def test_small_p(self):
        assert flom_constant(1e-9, 1.3) == pytest.approx(1.0, abs=1e-8)

    def test_half_one(self):
        assert flom_constant(0.5, 1.0) == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_removable_point(self):
        # E|Z| for Z ~ N(0, 2) equals 2/sqrt(pi)
        assert flom_constant(1.0, 2.0) == pytest.approx(2.0 / math.sqrt(math.pi), abs=1e-6)
        assert flom_constant(1.0 - 1e-7, 2.0) == pytest.approx(flom_constant(1.0 + 1e-7, 2.0), abs=1e-6)

    @pytest.mark.parametrize("p,alpha", [(0.3, 0.8), (-0.4, 1.5), (0.9, 1.2), (1.5, 1.9)])
    def test_direct_formula(self, p, alpha):
        direct = special.gamma(1 - p / alpha) / (special.gamma(1 - p) * math.cos(p * math.pi / 2))
        assert flom_constant(p, alpha) == pytest.approx(direct, rel=1e-12)

    @pytest.mark.parametrize("p", [0.5, 1.0, 1.5])
    def test_gaussian_moment(self, p):
        g = 1.0
        sd = math.sqrt(2 * g)
        moment = sd ** p * 2 ** (p / 2) * special.gamma((p + 1) / 2) / math.sqrt(math.pi)
        assert flom_constant(p, 2.0) * g ** (p / 2) == pytest.approx(moment, rel=1e-10)

    def test_cauchy_moment(self):
        # E|X|^p for a standard Cauchy is 1/cos(p*pi/2)
        assert flom_constant(0.4, 1.0) == pytest.approx(1 / math.cos(0.2 * math.pi), rel=1e-12)

    @pytest.mark.parametrize("p,alpha", [(-1.0, 1.0), (1.2, 1.2), (1.5, 1.0)])
    def test_out_of_range(self, p, alpha):
        with pytest.raises(ValueError):
            flom_constant(p, alpha)


class TestEstimators:
    def test_alpha_plug_in(self):
        assert alpha_from_log_variance(1.5 * PSI1) == pytest.approx(1.0)
        assert alpha_from_log_variance(0.75 * PSI1) == pytest.approx(2.0)
        assert alpha_from_log_variance(0.3 * PSI1) == 2.0
        assert alpha_from_log_variance(1e6) == pytest.approx(0.1)

    def test_alpha_cauchy(self):
        x = sample(StableParams(1.0), 200_000, 5)
        sym = x[1::2] - x[::2]
        assert abs(estimate_alpha(sym) - 1.0) < 0.03

    def test_alpha_rejects_zeros(self):
        with pytest.raises(ValueError):
            estimate_alpha(np.zeros(100))

    def test_alpha_warns(self):
        x = sample(StableParams(1.5), 200, 1)
        x[:3] = 0
        with pytest.warns(EstimationWarning, match="zeros"):
            estimate_alpha(x)
        with pytest.warns(EstimationWarning, match="usable"):
            estimate_alpha(x[3:23])

    def test_theta(self):
        assert estimate_theta([1.0, -1.0, 2.0, -3.0], 1.3) == 0.0
        assert estimate_theta([0.1, 2.0, 5.0], 0.5) == pytest.approx(math.pi / 4)
        assert estimate_theta([0.1, 2.0, 5.0], 0.5) == pytest.approx(StableParams(0.5, 1.0).theta)
        x = sample(StableParams(1.4, 0.9), 100_000, 8)
        assert abs(estimate_theta(x, 1.4) - StableParams(1.4, 0.9).theta) < 0.05

    def test_gamma_scaling_exact(self):
        x = sample(StableParams(1.3), 1000, 2)
        g = estimate_gamma(x, 1.3, 0.13)
        assert estimate_gamma(-3.0 * x, 1.3, 0.13) == pytest.approx(3.0 ** 1.3 * g, rel=1e-12)

    def test_gamma_monte_carlo(self):
        assert estimate_gamma(sample(StableParams(1.0, 0.0, 2.0), 100_000, 3), 1.0, 0.1) == pytest.approx(
            2.0, rel=0.05
        )
        assert estimate_gamma(sample(StableParams(2.0, 0.0, 0.5), 100_000, 4), 2.0, 0.2) == pytest.approx(
            0.5, rel=0.05
        )

    def test_gamma_errors(self):
        with pytest.raises(ValueError):
            estimate_gamma(np.zeros(10), 1.5, 0.15)
        with pytest.raises(ValueError):
            estimate_gamma(np.ones(10), 1.5, 1.6)

    def test_report_bounds(self):
        r = estimate(sample(StableParams(1.2, 0.5, 2.0), 5000, 1))
        assert 0.1 < r.alpha_hat <= 2.0
        assert -math.pi / 2 <= r.theta_hat <= math.pi / 2
        assert r.gamma_hat > 0
        assert r.n_used == 5000

    @pytest.mark.slow
    def test_consistency_in_n(self):
        p = StableParams(1.3, 0.6, 1.5)
        errs = {}
        for n in (1_000, 10_000, 100_000):
            e = np.zeros(3)
            for seed in range(50):
                r = estimate(sample(p, 2 * n, seed))
                e += np.abs([r.alpha_hat - p.alpha, r.theta_hat - p.theta, r.gamma_hat - p.gamma])
            errs[n] = e / 50
        assert np.all(errs[1_000] > errs[10_000])
        assert np.all(errs[10_000] > errs[100_000])
