import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcov.diagnostics import acf, residual_based_test, sur_xi, weak_wn_test
from gcov.errors import DegenerateSeries
from gcov.estimator import GcovOptions, autocov_jacobian, gcov_estimate
from gcov.models import Transform, mar_model, var_model
from gcov.schemas import TEST_REPORT
from gcov.simulation import rng_stream, simulate_mar
from gcov.stats import chi2_sf, sample_autocov


def ar1(a, T, seed, burn=100):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(T + burn)
    y = np.zeros(T + burn)
    for t in range(1, T + burn):
        y[t] = a * y[t - 1] + e[t]
    return y[burn:][None, :]


def pi_projector(jac, gamma0):
    """(Id - P) / gamma0^2 with P the projector on the Jacobian's columns."""
    P = jac @ np.linalg.pinv(jac)
    return (np.eye(jac.shape[0]) - P) / gamma0**2


class TestWeakWn:
    def test_univariate_reduction(self):
        y = np.random.default_rng(5).standard_normal(300)
        yc = y - y.mean()
        T = y.size
        g0 = yc @ yc / T
        rho = np.array([(yc[h:] @ yc[:-h]) / (T - h) / g0 for h in range(1, 6)])
        rep = weak_wn_test(y, 5)
        assert rep.statistic == pytest.approx(T * np.sum(rho**2), rel=1e-12)
        assert rep.df == 5
        assert rep.p_value == chi2_sf(rep.statistic, 5)
        assert "df_alt" not in rep.extra

    def test_multivariate_reports_both_df(self):
        rep = weak_wn_test(np.random.default_rng(1).standard_normal((2, 200)), 3)
        assert rep.df == 12 and rep.extra["df_alt"] == 6
        assert rep.extra["p_value_alt"] == chi2_sf(rep.statistic, 6)
        assert sum(rep.extra["trace_r2_by_lag"]) * 200 == pytest.approx(rep.statistic)
        jsonschema.validate(rep.to_dict(), TEST_REPORT)

    def test_constant_series_is_degenerate(self):
        # y_t = y_{t-1} for all t
        with pytest.raises(DegenerateSeries):
            weak_wn_test(np.full(50, 1.7), 2)

    @pytest.mark.slow
    def test_size(self):
        p = np.array([weak_wn_test(np.random.default_rng(s).standard_normal(1000), 10).p_value
                      for s in range(500)])
        assert 0.03 <= np.mean(p < 0.05) <= 0.072


class TestSur:
    @settings(max_examples=25, deadline=None)
    @given(K=st.integers(1, 3), seed=st.integers(0, 2**31 - 1))
    def test_h1_equals_weak_wn(self, K, seed):
        y = np.random.default_rng(seed).standard_normal((K, 80))
        assert sur_xi(y, 1).statistic == pytest.approx(weak_wn_test(y, 1).statistic, rel=1e-12)

    @pytest.mark.slow
    def test_mean_under_iid(self):
        stats = [sur_xi(np.random.default_rng(s).standard_normal((2, 2000)), 3).statistic
                 for s in range(300)]
        assert abs(np.mean(stats) - 12) <= 2

    def test_paired_with_weak_wn(self):
        y = np.vstack([ar1(0.2, 2000, 1)[0], ar1(-0.1, 2000, 2)[0]])
        a, b = sur_xi(y, 3).statistic, weak_wn_test(y, 3).statistic
        assert a / 3 <= b <= 3 * a


class TestResidualBased:
    def test_df_ledger(self):
        y = ar1(0.5, 600, 0)
        res = gcov_estimate(var_model(1, 1), y, GcovOptions(H=6))
        rep = residual_based_test(res)
        assert rep.statistic == res.statistic
        assert rep.df + res.jacobian_rank == 6
        assert rep.p_value == chi2_sf(res.statistic, 5)

    def test_just_identified(self):
        res = gcov_estimate(var_model(1, 1), ar1(0.5, 400, 3), GcovOptions(H=1))
        rep = residual_based_test(res)
        assert rep.df == 0 and rep.p_value is None and rep.extra["non_positive_df"]
        assert rep.statistic <= 1e-8
        jsonschema.validate(rep.to_dict(), TEST_REPORT)

    def test_mar33_three_powers(self):
        phi, psi = [0.7029, 0.1020, 0.1666], [0.3359, -0.0026, 0.0072]
        y = simulate_mar(phi, psi, 300, 3.0, rng_stream(0, 0))
        tags = (Transform("identity"), Transform("square"), Transform("cube"))
        res = gcov_estimate(mar_model(3, 3, tags), y, GcovOptions(H=3, multistart=1))
        rep = residual_based_test(res)
        assert res.K == 3 and res.jacobian_rank == 6
        assert rep.df == 21

    @pytest.mark.slow
    def test_size_with_one_parameter(self):
        stats = []
        for s in range(300):
            res = gcov_estimate(var_model(1, 1), ar1(0.5, 1000, 1000 + s),
                                GcovOptions(H=10, multistart=1))
            stats.append(residual_based_test(res).statistic)
        stats = np.array(stats)
        assert abs(stats.mean() - 9) <= 1.4
        assert 0.03 <= np.mean([chi2_sf(s, 9) < 0.05 for s in stats]) <= 0.075


class TestAcf:
    def test_unit_diagonal(self):
        r = acf(np.random.default_rng(0).standard_normal((3, 100)), 4)
        assert r.shape == (5, 3, 3)
        np.testing.assert_allclose(np.diag(r[0]), 1.0, rtol=1e-14)

    def test_univariate_formula(self):
        y = np.random.default_rng(4).standard_normal(120)
        yc = y - y.mean()
        T = y.size
        expected = [1.0] + [(yc[h:] @ yc[:-h]) / (T - h) / (yc @ yc / T) for h in range(1, 8)]
        np.testing.assert_allclose(acf(y, 7)[:, 0, 0], expected, rtol=1e-12)

    def test_white_noise_band(self):
        T = 1000
        r = acf(np.random.default_rng(12).standard_normal(T), 40)[1:, 0, 0]
        assert np.mean(np.abs(r) <= 4 / np.sqrt(T)) >= 0.95

    def test_degenerate(self):
        with pytest.raises(DegenerateSeries):
            acf(np.zeros(30), 3)


class TestProjector:
    @pytest.mark.parametrize("H", [2, 5, 10])
    def test_pi_sigma_pi(self, H):
        y = ar1(0.5, 500, 7)
        res = gcov_estimate(var_model(1, 1), y, GcovOptions(H=H))
        theta = res.theta_hat.values
        jac = autocov_jacobian(var_model(1, 1), theta, y, H)
        u = y[:, 1:] - theta[0] * y[:, :-1]
        g0 = sample_autocov(u, 0)
        sigma = np.kron(g0, g0)[0, 0] * np.eye(H)
        pi = pi_projector(jac, g0[0, 0])
        assert np.linalg.norm(pi @ sigma @ pi - pi) <= 1e-6 * np.linalg.norm(pi)
        # rank H - 1: one direction is absorbed by the estimated parameter
        assert np.linalg.matrix_rank(pi * g0[0, 0] ** 2, tol=1e-8) == H - 1
