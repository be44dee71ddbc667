import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate

from betacoal.errors import InvalidArgument
from betacoal.mu import (InversionConfig, MuTable, build_mu_table, get_mu_table,
                         head_series, laplace_mu, laplace_size_biased, quantile_mu,
                         sample_mu, tail_sf)


def mp_cdf(alpha, x):
    """F(x) by Talbot inversion of phi(s)/s at 30 digits."""
    mp.mp.dps = 30
    a = mp.mpf(alpha)
    fhat = lambda s: (1 - (1 + s ** (1 - a)) ** (-1 / (a - 1))) / s
    return mp.invertlaplace(fhat, x, method="talbot")


def mp_quantile(alpha, q):
    """x with 1 - F(x) = q, by root finding on the mp inversion."""
    mp.mp.dps = 30
    x0 = (math.gamma(2 - alpha) * q) ** (-1 / alpha)
    return float(mp.findroot(lambda x: 1 - mp_cdf(alpha, x) - q, x0))


@pytest.fixture(scope="module")
def table():
    return get_mu_table(1.5)


class TestLaplace:
    @pytest.mark.parametrize("a", [1.2, 1.5, 1.8])
    def test_total_mass(self, a):
        assert laplace_mu(a, 0.0) == 1.0
        assert laplace_size_biased(a, 0.0) == 1.0

    def test_values(self):
        assert laplace_mu(1.5, 1.0) == pytest.approx(0.75, rel=1e-15)
        assert laplace_size_biased(1.5, 1.0) == pytest.approx(0.125, rel=1e-15)

    def test_vectorized(self):
        lam = np.array([0.5, 1.0, 2.0])
        np.testing.assert_allclose(laplace_mu(1.5, lam), [laplace_mu(1.5, v) for v in lam])

    def test_slope_at_origin(self):
        h = 1e-6
        slope = (laplace_mu(1.5, h) - 1.0) / h
        assert slope == pytest.approx(-1.0, abs=1e-3)

    @pytest.mark.parametrize("a", [1.2, 1.5, 1.8])
    def test_slope_correction(self, a):
        # 1 - phi(h) = h (1 + h^(a-1))^(-1/(a-1)), so slope + 1 ~ h^(a-1)/(a-1)
        for h in (1e-6, 1e-8, 1e-10):
            slope = (laplace_mu(a, h) - 1.0) / h
            expected = -((1 + h ** (a - 1)) ** (-1 / (a - 1)))
            assert slope == pytest.approx(expected, rel=1e-5)
        assert laplace_mu(1.8, 1e-6) - 1.0 == pytest.approx(-1e-6, rel=1e-3)

    @pytest.mark.parametrize("a", [1.2, 1.5, 1.8])
    def test_size_biased_is_derivative(self, a):
        h = 1e-5
        deriv = -(laplace_mu(a, 2 + h) - laplace_mu(a, 2 - h)) / (2 * h)
        assert abs(deriv - laplace_size_biased(a, 2.0)) <= 1e-6

    def test_size_biased_small_lambda_law(self):
        a = 1.5
        for lam in (1e-2, 1e-3):
            v = (1 - laplace_size_biased(a, lam)) / lam ** (a - 1)
            assert v == pytest.approx(a / (a - 1), rel=0.02)

    @pytest.mark.parametrize("a", [1.2, 1.5, 1.8])
    def test_size_biased_limit_rate(self, a):
        # 1 - (1 + e)^(-q) = q e - q(q+1) e^2/2 + ..., e = lam^(a-1), q = a/(a-1)
        q = a / (a - 1)
        for lam in (1e-4, 1e-6, 1e-8):
            e = lam ** (a - 1)
            v = (1 - laplace_size_biased(a, lam)) / e
            # second-order remainder plus cancellation in 1 - psi
            tol = 2 * q ** 3 * e ** 2 + 1e-15 / e
            assert v == pytest.approx(q - q * (q + 1) * e / 2, abs=tol)

    def test_rejects_negative(self):
        with pytest.raises(InvalidArgument):
            laplace_mu(1.5, -1.0)
        with pytest.raises(InvalidArgument):
            laplace_size_biased(1.5, -1.0)
        with pytest.raises(InvalidArgument):
            laplace_mu(2.0, 1.0)


class TestTable:
    def test_invariants(self, table):
        assert table.grid[0] <= 1e-4
        assert table.cdf[0] < 0.01
        assert np.all(np.diff(table.grid) > 0)
        assert np.all(np.diff(table.cdf) > 0)
        assert np.all(np.diff(table.sf) < 0)
        assert table.sf[-1] <= 1e-3
        assert table.grid.size >= 400
        assert table.tail_coeff == pytest.approx(1 / math.gamma(0.5))
        assert table.tail_exponent == 1.5

    def test_mean_one(self, table):
        assert table.mean() == pytest.approx(1.0, abs=5e-3)

    def test_switch_point_agrees_with_tail(self, table):
        x = table.switch_point
        assert table.sf_at(x) / tail_sf(1.5, x) == pytest.approx(1.0, rel=0.02)

    @pytest.mark.parametrize("a", [1.2, 1.5, 1.8])
    @pytest.mark.parametrize("x", [1e-3, 0.1, 1.0, 10.0, 50.0])
    def test_against_mp_inversion(self, a, x):
        tab = get_mu_table(a)
        ref = mp_cdf(a, x)
        assert tab.cdf_at(x) == pytest.approx(float(ref), rel=3e-4)
        assert tab.sf_at(x) == pytest.approx(float(1 - ref), rel=3e-4)

    def test_head_series_against_oracle(self):
        for x in (1e-6, 1e-4):
            assert head_series(1.5, x)[0] == pytest.approx(float(mp_cdf(1.5, x)), rel=1e-10)

    def test_head_vanishes(self, table):
        assert table.cdf_at(0.5 * table.grid[0]) < table.cdf[0] < 0.01
        assert table.cdf_at(0.0) == 0.0

    def test_tail_at_50(self, table):
        scaled = table.sf_at(50.0) * 50 ** 1.5 * math.gamma(0.5)
        assert scaled == pytest.approx(1.0, abs=0.02)

    def test_tail_at_50_oracle(self, table):
        # the asymptotic tail overestimates at x = 50; the exact value is lower
        assert table.sf_at(50.0) == pytest.approx(1.50660e-3, rel=1e-4)

    def test_tail_ratio_tends_to_one(self, table):
        x = np.array([50.0, 150.0, 400.0, table.switch_point])
        r = table.sf_at(x) / tail_sf(1.5, x)
        assert np.all(np.diff(np.abs(r - 1)) < 0)
        assert abs(r[-1] - 1) < 5e-3

    def test_round_trip(self, table):
        # E exp(-lam X) = 1 - lam * int exp(-lam x) (1 - F(x)) dx
        x, G = table.grid, table.sf
        for lam in (0.5, 1.0, 2.0):
            body = integrate.trapezoid(np.exp(-lam * x) * G * x, np.log(x))
            est = 1.0 - lam * (x[0] + body)
            assert est == pytest.approx(laplace_mu(1.5, lam), abs=5e-3)

    def test_no_atoms_under_refinement(self):
        jumps = [np.diff(build_mu_table(1.5, InversionConfig(points_per_decade=p)).cdf).max()
                 for p in (10, 20, 40, 80)]
        assert np.all(np.diff(jumps) < 0)
        assert jumps[-1] < 0.006

    @pytest.mark.parametrize("a", [1.2, 1.8])
    def test_other_alphas(self, a):
        tab = get_mu_table(a)
        assert tab.mean() == pytest.approx(1.0, abs=5e-3)
        assert tab.cdf[0] < 0.01

    def test_csv_round_trip(self, table, tmp_path):
        p = tmp_path / "mu.csv"
        table.to_csv(p)
        back = MuTable.from_csv(p)
        np.testing.assert_array_equal(back.grid, table.grid)
        np.testing.assert_array_equal(back.cdf, table.cdf)
        np.testing.assert_array_equal(back.sf, table.sf)
        assert back.switch_point == table.switch_point
        x = np.geomspace(1e-5, 1e5, 50)
        np.testing.assert_array_equal(back.cdf_at(x), table.cdf_at(x))

    def test_csv_rejects_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("x,F,sf\n1,0.5,0.5\n")
        with pytest.raises(InvalidArgument):
            MuTable.from_csv(p)

    def test_memoized(self):
        assert get_mu_table(1.5) is get_mu_table(1.5)


class TestQuantile:
    @pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
    def test_round_trip(self, table, p):
        assert table.cdf_at(quantile_mu(table, p)) == pytest.approx(p, abs=1e-5)

    def test_monotone(self, table):
        p = np.linspace(1e-6, 1 - 1e-6, 20_001)
        assert np.all(np.diff(quantile_mu(table, p)) > 0)

    def test_far_tail(self, table):
        assert quantile_mu(table, 1 - 1e-4) == pytest.approx(317.1, abs=0.05)

    def test_far_tail_oracle(self, table):
        assert table.quantile(1 - 1e-4, 1e-4) == pytest.approx(mp_quantile(1.5, 1e-4), rel=1e-4)

    def test_beyond_table_uses_analytic_tail(self, table):
        q = 0.5 * table.sf[-1]
        x = table.quantile(1 - q, q)
        assert x == pytest.approx((math.gamma(0.5) * q) ** (-1 / 1.5), rel=1e-12)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_rejects(self, table, p):
        with pytest.raises(InvalidArgument):
            quantile_mu(table, p)


@pytest.fixture(scope="module")
def draws(table):
    return sample_mu(table, np.random.default_rng(2024), 1_000_000)


class TestSampling:
    def test_laplace(self, draws):
        for lam in (0.5, 1.0, 2.0):
            est = np.exp(-lam * draws).mean()
            assert est == pytest.approx(laplace_mu(1.5, lam), abs=3e-3)

    def test_tail_fraction(self, draws):
        assert (draws > 50).mean() == pytest.approx(1.6e-3, abs=4e-4)

    def test_mean(self, draws):
        assert 0.9 <= draws.mean() <= 1.1

    def test_positive(self, draws):
        assert draws.min() > 0

    def test_reproducible(self, table):
        a = sample_mu(table, np.random.default_rng(7), 1000)
        b = sample_mu(table, np.random.default_rng(7), 1000)
        np.testing.assert_array_equal(a, b)
