import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from betacoal.errors import InvalidArgument
from betacoal.measures import Beta, Density, Kingman, PowerLaw
from betacoal.rates import (RateCache, get_cache, jump_distribution, lambda_bk,
                            limit_zeta, total_rate, total_rate_direct)


def beta_density(alpha):
    c = 1.0 / (math.gamma(2 - alpha) * math.gamma(alpha))
    return lambda x: c * x ** (1 - alpha) * (1 - x) ** (alpha - 1)


def mp_rate(alpha, b, k, delta=1.0, coef=None, gamma=None):
    """Merger rate by arbitrary-precision quadrature of the defining integral."""
    mp.mp.dps = 30
    a = mp.mpf(alpha)
    g = a - 1 if gamma is None else mp.mpf(gamma)
    c = 1 / (mp.gamma(2 - a) * mp.gamma(a)) if coef is None else mp.mpf(coef)
    f = lambda x: c * x ** (k - 1 - a) * (1 - x) ** (b - k + g)
    return float(mp.quad(f, [0, mp.mpf(k - 1) / b, delta]))


def mp_total(alpha, b):
    """Total rate as an exact 30-digit sum of binomial times beta terms."""
    mp.mp.dps = 30
    a = mp.mpf(alpha)
    lb = mp.log(mp.beta(2 - a, a))
    return float(mp.fsum(mp.exp(mp.log(mp.binomial(b, k)) + mp.log(mp.beta(k - a, b - k + a)) - lb)
                         for k in range(2, b + 1)))


class TestLambdaBK:
    def test_b2_is_total_mass(self):
        for a in (1.1, 1.5, 1.9):
            assert lambda_bk(Beta(a), 2, 2) == pytest.approx(1.0, rel=1e-14)

    def test_beta_three_blocks(self):
        m = Beta(1.5)
        assert lambda_bk(m, 3, 2) == pytest.approx(0.75, rel=1e-14)
        assert lambda_bk(m, 3, 3) == pytest.approx(0.25, rel=1e-14)

    def test_kingman(self):
        assert lambda_bk(Kingman(), 7, 2) == 1.0
        assert lambda_bk(Kingman(), 7, 3) == 0.0

    @pytest.mark.parametrize("b,k", [(3, 2), (10, 4), (30, 2), (30, 17), (30, 30)])
    def test_beta_against_mp_oracle(self, b, k):
        assert lambda_bk(Beta(1.5), b, k) == pytest.approx(mp_rate(1.5, b, k), rel=1e-12)

    @pytest.mark.parametrize("delta", [0.3, 0.9])
    def test_restricted_power_law_against_oracle(self, delta):
        m = PowerLaw(1.3, A=2.0, delta=delta)
        for b, k in [(5, 2), (12, 6)]:
            ref = mp_rate(1.3, b, k, delta=delta, coef=2.0, gamma=0.0)
            assert m.lambda_bk(b, k) == pytest.approx(ref, rel=1e-10)

    def test_density_quadrature_matches_closed_form(self):
        a = 1.5
        d = Density(a, 1 / (math.gamma(2 - a) * math.gamma(a)), beta_density(a))
        m = Beta(a)
        for b in (2, 5, 17, 30):
            for k in range(2, b + 1):
                closed = m.lambda_bk(b, k)
                assert abs(d.lambda_bk(b, k) - closed) / closed <= 1e-8

    def test_invalid_indices(self):
        with pytest.raises(InvalidArgument):
            lambda_bk(Beta(1.5), 3, 1)
        with pytest.raises(InvalidArgument):
            lambda_bk(Beta(1.5), 3, 4)

    def test_invalid_alpha(self):
        for a in (1.0, 2.0, 2.5, float("nan")):
            with pytest.raises(InvalidArgument):
                Beta(a)

    def test_density_asymptotics_checked(self):
        with pytest.raises(InvalidArgument):
            Density(1.5, 1.0, lambda x: 2.0 * x ** -0.5)


class TestConsistency:
    measures = [Beta(1.2), Beta(1.5), Beta(1.8), PowerLaw(1.5, A=2.0), Kingman(),
                Beta(1.5, delta=0.4)]

    @pytest.mark.parametrize("m", measures, ids=repr)
    def test_consistency_identity(self, m):
        for b in range(2, 51):
            for k in range(2, b + 1):
                lhs = m.lambda_bk(b, k)
                rhs = m.lambda_bk(b + 1, k) + m.lambda_bk(b + 1, k + 1)
                if lhs == 0:
                    assert rhs == 0
                else:
                    assert abs(lhs - rhs) / lhs <= 1e-10

    def test_consistency_identity_density(self):
        a = 1.5
        d = Density(a, 1 / (math.gamma(2 - a) * math.gamma(a)), beta_density(a))
        for b in range(2, 16):
            for k in range(2, b + 1):
                lhs = d.lambda_bk(b, k)
                assert lhs == pytest.approx(d.lambda_bk(b + 1, k) + d.lambda_bk(b + 1, k + 1),
                                            rel=1e-10)


class TestTotalRate:
    def test_small_values(self):
        assert total_rate(Beta(1.3), 2) == pytest.approx(1.0, rel=1e-14)
        assert total_rate(Beta(1.5), 3) == pytest.approx(2.5, rel=1e-14)
        assert total_rate(Kingman(), 100) == 4950.0

    @pytest.mark.parametrize("a", [1.2, 1.5, 1.8])
    def test_cache_against_mp_oracle(self, a):
        cache = RateCache(Beta(a))
        for b in (3, 257, 5000):
            assert abs(cache.total(b) / mp_total(a, b) - 1) <= 1e-12

    @pytest.mark.parametrize("a", [1.2, 1.5, 1.8])
    def test_cache_matches_direct_sum(self, a):
        m = Beta(a)
        cache = RateCache(m)
        for b in (2, 3, 10, 257, 5000, 100_000):
            assert cache.total(b) == pytest.approx(total_rate_direct(m, b), rel=1e-12)

    def test_power_law_and_restricted(self):
        for m in (PowerLaw(1.5, A=2.0), Beta(1.5, delta=0.5)):
            cache = RateCache(m)
            for b in (2, 9, 400):
                assert cache.total(b) == pytest.approx(total_rate_direct(m, b), rel=1e-12)

    def test_growth_band(self):
        m = Beta(1.5)
        b = np.unique(np.geomspace(100, 100_000, 30).astype(int))
        ratio = get_cache(m).table(int(b[-1]))[b] / b ** 1.5
        # lambda_b ~ A Gamma(2-alpha) b^alpha / alpha = b^alpha / (alpha Gamma(alpha))
        assert ratio.max() / ratio.min() < 1.2
        np.testing.assert_allclose(ratio[-1], 1 / (1.5 * math.gamma(1.5)), rtol=0.01)

    def test_shared_registry(self):
        assert get_cache(Beta(1.5)) is get_cache(Beta(1.5))

    def test_rejects_small_b(self):
        with pytest.raises(InvalidArgument):
            total_rate(Beta(1.5), 1)


class TestJumpDistribution:
    def test_n2(self):
        for m in (Beta(1.5), Kingman(), PowerLaw(1.7, A=0.5)):
            np.testing.assert_allclose(jump_distribution(m, 2), [1.0])

    def test_beta_n3(self):
        np.testing.assert_allclose(jump_distribution(Beta(1.5), 3), [0.9, 0.1], rtol=1e-14)

    def test_kingman(self):
        np.testing.assert_array_equal(jump_distribution(Kingman(), 5), [1, 0, 0, 0])

    @pytest.mark.parametrize("n", [10, 1000, 100_000])
    def test_rows_normalized(self, n):
        z = jump_distribution(Beta(1.5), n)
        assert z.min() >= 0
        assert abs(math.fsum(z) - 1) <= 1e-12

    def test_row_matches_cached_total(self):
        m = Beta(1.5)
        n = 2000
        z = jump_distribution(m, n)
        direct = math.comb(n, 2) * m.lambda_bk(n, 2) / total_rate(m, n)
        assert z[0] == pytest.approx(direct, rel=1e-12)

    @pytest.mark.parametrize("a", [1.2, 1.5, 1.8])
    def test_convergence_to_limit(self, a):
        k = np.arange(1, 6)
        errs = np.array([np.abs(jump_distribution(Beta(a), n)[:5] - limit_zeta(a, k))
                         for n in (10, 100, 1000, 10_000)])
        assert np.all(np.diff(errs, axis=0) < 0)
        assert errs[-1].max() <= 5e-3

    def test_tail_bound_stable(self):
        # zeta_{n,k} k^(1+alpha) stays bounded uniformly in n
        a = 1.5
        sups = []
        for n in (100, 1000, 10_000):
            z = jump_distribution(Beta(a), n)
            k = np.arange(1, n)
            sups.append((z * k ** (1 + a)).max())
        assert max(sups) < 2.0
        assert max(sups) / min(sups) < 1.2


class TestLimitZeta:
    def test_values(self):
        # k=1: alpha Gamma(2-alpha) / (2 Gamma(2-alpha)) = alpha/2
        assert limit_zeta(1.5, 1) == pytest.approx(0.75, rel=1e-14)
        assert limit_zeta(1.5, 2) == pytest.approx(0.125, rel=1e-14)

    def test_against_gamma_formula(self):
        for a in (1.2, 1.5, 1.8):
            for k in (1, 2, 7):
                ref = a * math.gamma(k + 1 - a) / (math.factorial(k + 1) * math.gamma(2 - a))
                assert limit_zeta(a, k) == pytest.approx(ref, rel=1e-13)

    def test_sums(self):
        k = np.arange(1, 2_000_001)
        z = limit_zeta(1.5, k)
        assert math.fsum(z) == pytest.approx(1.0, abs=1e-3)
        # k zeta_k ~ k^(-alpha): the partial mean converges like K^(1-alpha)
        assert math.fsum(k * z) == pytest.approx(2.0, abs=2e-3)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1.05, 1.95), st.integers(1, 200))
    def test_positive_below_one(self, a, k):
        v = limit_zeta(a, k)
        assert 0 < v < 1


class TestUtilities:
    @settings(max_examples=25, deadline=None)
    @given(st.floats(1.05, 1.95), st.integers(2, 300))
    def test_row_total_equals_cache(self, a, b):
        m = Beta(a)
        assert total_rate_direct(m, b) == pytest.approx(total_rate(m, b), rel=1e-12)
