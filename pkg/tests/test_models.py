import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcov.diagnostics import weak_wn_test
from gcov.errors import DomainError, ShapeMismatch, TooShort, UnknownModel
from gcov.models import (
    ModelSpec,
    ThetaVector,
    Transform,
    apply_transforms,
    ar_arch_model,
    build_model,
    mar_model,
    model_residuals,
    residuals_ar_arch,
    residuals_mar,
    residuals_var,
    var_model,
)
from gcov.simulation import rng_stream, simulate_ar_arch, simulate_mar
from gcov.stats import sample_autocov, trace_r2

from oracles import discretized_chi2_sum

MAR33_PHI = [0.7029, 0.1020, 0.1666]
MAR33_PSI = [0.3359, -0.0026, 0.0072]


def loop_var_residuals(y, phis):
    K, T = y.shape
    p = len(phis)
    out = np.zeros((K, T - p))
    for t in range(p, T):
        for i in range(K):
            acc = y[i, t]
            for j, phi in enumerate(phis, 1):
                for k in range(K):
                    acc -= phi[i, k] * y[k, t - j]
            out[i, t - p] = acc
    return out


def polyproduct_mar_residuals(y, phi, psi):
    """Expand (1 - sum phi L^j)(1 - sum psi L^-k) as one two-sided filter."""
    r, s = len(phi), len(psi)
    causal = np.r_[1.0, -np.asarray(phi)]          # coefficient of L^j, j = 0..r
    lead = np.r_[1.0, -np.asarray(psi)]            # coefficient of L^-k, k = 0..s
    # c[m + s] is the coefficient of L^m, m = -s..r
    c = np.convolve(causal, lead[::-1])
    T = len(y)
    out = []
    for t in range(r, T - s):
        out.append(sum(c[m + s] * y[t - m] for m in range(-s, r + 1)))
    return np.array(out)


class TestVar:
    def test_zero_phi_is_identity(self):
        y = np.random.default_rng(0).standard_normal((2, 10))
        np.testing.assert_array_equal(residuals_var(y, [np.zeros((2, 2))] * 2), y[:, 2:])

    def test_first_differences(self):
        np.testing.assert_array_equal(residuals_var([1.0, 2.0, 3.0], [[[1.0]]]), [[1.0, 1.0]])

    def test_loop_oracle(self):
        rng = np.random.default_rng(5)
        y = rng.standard_normal((2, 30))
        phis = [np.array([[0.4, -0.2], [0.1, 0.3]]), np.array([[-0.1, 0.05], [0.2, -0.3]])]
        np.testing.assert_allclose(residuals_var(y, phis), loop_var_residuals(y, phis),
                                   rtol=1e-14, atol=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            residuals_var(np.zeros((2, 10)) + np.arange(10), [np.eye(3)])

    def test_ols_residuals_orthogonal_to_lag(self):
        rng = np.random.default_rng(9)
        T = 300
        y = np.zeros((2, T))
        for t in range(1, T):
            y[:, t] = np.array([[0.5, 0.1], [0.2, 0.3]]) @ y[:, t - 1] + rng.standard_normal(2)
        X = np.vstack([np.ones(T - 1), y[:, :-1]]).T
        coef, *_ = np.linalg.lstsq(X, y[:, 1:].T, rcond=None)
        B = coef[1:].T
        u = residuals_var(y, [B])
        lag = y[:, :-1] - y[:, :-1].mean(axis=1, keepdims=True)
        assert np.abs(u @ lag.T / (T - 1)).max() <= 1e-10
        # the autocovariance ratio is the same regression up to end effects
        moment_B = sample_autocov(y, 1) @ np.linalg.inv(sample_autocov(y, 0))
        np.testing.assert_allclose(moment_B, B, atol=0.05)


class TestMar:
    def test_zero_coefficients(self):
        y = np.arange(8.0)
        np.testing.assert_array_equal(residuals_mar(y, [0.0], [0.0]), [y[1:-1]])

    def test_three_point(self):
        assert residuals_mar([0.0, 1.0, 0.0], [0.5], [0.5])[0, 0] == pytest.approx(1.25)

    def test_mar33_polynomial_product(self):
        y = simulate_mar(MAR33_PHI, MAR33_PSI, 300, 6.0, rng_stream(1, 0))[0]
        np.testing.assert_allclose(residuals_mar(y, MAR33_PHI, MAR33_PSI)[0],
                                   polyproduct_mar_residuals(y, MAR33_PHI, MAR33_PSI),
                                   rtol=1e-12, atol=1e-12 * np.abs(y).max())

    def test_factor_order_invariance(self):
        rng = np.random.default_rng(4)
        y = rng.standard_normal(60)
        phi, psi = [0.6, -0.2], [0.3, 0.1, 0.05]
        r, s = len(phi), len(psi)
        # causal filter first, then the lead filter
        v = y[r:].copy()
        for j in range(1, r + 1):
            v -= phi[j - 1] * y[r - j : len(y) - j]
        n = len(v) - s
        u = v[:n].copy()
        for k in range(1, s + 1):
            u -= psi[k - 1] * v[k : n + k]
        np.testing.assert_allclose(residuals_mar(y, phi, psi)[0], u, rtol=1e-12, atol=1e-12)

    def test_too_short(self):
        with pytest.raises(TooShort):
            residuals_mar([1.0, 2.0, 3.0], [0.1, 0.1], [0.1])


class TestArArch:
    def test_switched_off(self):
        y = np.random.default_rng(0).standard_normal(20)
        u = residuals_ar_arch(y, 0.0, 0.0)
        np.testing.assert_array_equal(u[0], y[2:])
        np.testing.assert_array_equal(u[1], np.abs(y[2:]))

    def test_pure_ar(self):
        y = np.random.default_rng(1).standard_normal(20)
        np.testing.assert_allclose(residuals_ar_arch(y, 0.7, 0.0)[0], y[2:] - 0.7 * y[1:-1])

    def test_recursion_oracle(self):
        y = [0.3, -1.2, 0.8, 2.0, -0.5, 0.1]
        expected = [1.1256878363460119, 1.2696813301379035, -1.1281065704928503,
                    0.2704335932501895]
        u = residuals_ar_arch(y, 0.5, 0.3)
        np.testing.assert_allclose(u[0], expected, rtol=1e-14)
        np.testing.assert_allclose(u[1], np.abs(expected), rtol=1e-14)

    def test_variance_floor_penalty(self):
        y = np.random.default_rng(2).standard_normal(50) * 3
        model = ar_arch_model(alpha1_bounds=(-1.0, 3.0))
        u, penalty = model.evaluate([0.2, -0.9], y)
        assert np.all(np.isfinite(u))
        assert penalty > 0
        _, penalty0 = model.evaluate([0.2, 0.5], y)
        assert penalty0 == 0.0


class TestTransforms:
    def test_identity(self):
        u = np.array([[1.0, -2.0, 3.0]])
        np.testing.assert_array_equal(apply_transforms(u, [Transform("identity")]), u)

    def test_powers_stack(self):
        u = np.array([[1.0, -2.0, 3.0]])
        out = apply_transforms(u, [Transform("identity"), Transform("square"), Transform("cube")])
        np.testing.assert_array_equal(out, np.vstack([u, u**2, u**3]))

    def test_sign_indicator(self):
        out = apply_transforms([[-1.0, 2.0, -3.0]], [Transform("indicator", edges=(-np.inf, 0.0, np.inf))])
        np.testing.assert_array_equal(out, [[1.0, 0.0, 1.0]])

    def test_power_domain(self):
        with pytest.raises(DomainError):
            apply_transforms([[1.0, -1.0]], [Transform("power", power=0.5)])
        np.testing.assert_allclose(apply_transforms([[4.0, 9.0]], [Transform("power", power=0.5)]),
                                   [[2.0, 3.0]])

    def test_edges_must_increase(self):
        with pytest.raises(ValueError):
            Transform("indicator", edges=(1.0, 0.0))

    @pytest.mark.parametrize("text", ["identity", "abs", "square", "cube", "sign", "power:0.5",
                                      "indicator:-1/0/1"])
    def test_parse_roundtrip(self, text):
        assert str(Transform.parse(text)) == text

    def test_discretization_chi_square_identity(self):
        rng = np.random.default_rng(8)
        y = simulate_ar_arch(0.6, 0.3, 500, rng)[0]
        edges = (-1.0, 0.0, 1.0)
        ind = apply_transforms([y], [Transform("indicator", edges=edges)])
        H = 3
        lhs = sum(trace_r2(sample_autocov(ind, h), sample_autocov(ind, 0)) for h in range(1, H + 1))

        # independent oracle from cell counts over all K + 1 = 4 bins
        T = y.size
        cell = np.searchsorted(edges, y, side="right")
        p = np.bincount(cell, minlength=len(edges) + 1) / T
        rhs = discretized_chi2_sum(cell, len(edges) + 1, H)
        assert lhs == pytest.approx(rhs, rel=1e-10)

        # the closed-form inverse of diag(p) - pp' over the first K bins
        pk = p[:-1]
        g0_inv = np.diag(1.0 / pk) + np.ones((pk.size, pk.size)) / (1.0 - pk.sum())
        np.testing.assert_allclose(g0_inv @ sample_autocov(ind, 0), np.eye(pk.size), atol=1e-10)


class TestModelSpec:
    def test_unknown(self):
        with pytest.raises(UnknownModel):
            build_model("garch")
        with pytest.raises(UnknownModel):
            ModelSpec("garch", ThetaVector([0.0], ("x",)), (0, 0), 1)

    def test_residual_dim(self):
        m = mar_model(1, 1, (Transform("identity"), Transform("indicator", edges=(0.0, 1.0))))
        assert m.residual_dim == 3
        y = np.random.default_rng(0).standard_normal(30)
        assert model_residuals(m, [0.1, 0.2], y).shape == (3, 28)

    def test_theta_bounds_enforced(self):
        with pytest.raises(ValueError):
            ThetaVector([2.0], ("a",), -1.0, 1.0)

    def test_noise_free_var(self):
        phi = np.array([[0.5, 0.2], [-0.1, 0.4]])
        y = np.zeros((2, 40))
        y[:, 0] = [1.0, -2.0]
        for t in range(1, 40):
            y[:, t] = phi @ y[:, t - 1]
        u = model_residuals(var_model(2, 1), phi.reshape(-1), y)
        np.testing.assert_allclose(u, 0.0, atol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(family=st.sampled_from(["var1", "var2", "mar12", "mar31", "ar_arch"]),
           T=st.integers(12, 60), seed=st.integers(0, 1000))
    def test_trimming_arithmetic(self, family, T, seed):
        rng = np.random.default_rng(seed)
        model = {"var1": var_model(1, 1), "var2": var_model(2, 2), "mar12": mar_model(1, 2),
                 "mar31": mar_model(3, 1), "ar_arch": ar_arch_model()}[family]
        y = rng.standard_normal((model.base_dim, T))
        tmpl = model.param_template
        lo = np.where(np.isfinite(tmpl.lower), tmpl.lower, -1.0)
        hi = np.where(np.isfinite(tmpl.upper), tmpl.upper, 1.0)
        theta = rng.uniform(lo, hi)
        u = model_residuals(model, theta, y)
        assert u.shape == (model.residual_dim, T - sum(model.trim))

    def test_mar_residual_autocov_shrinks_with_T(self):
        def mean_abs_gamma(T):
            vals = []
            for s in range(10):
                y = simulate_mar([0.3], [0.5], T, 6.0, rng_stream(s, 1))
                u = model_residuals(mar_model(1, 1), [0.3, 0.5], y)
                vals.append(sum(abs(sample_autocov(u, h)[0, 0]) for h in (1, 2, 3)))
            return np.mean(vals)
        assert mean_abs_gamma(1600) < mean_abs_gamma(400)

    @pytest.mark.slow
    def test_ar_arch_true_residuals_pass_white_noise(self):
        passes = 0
        for s in range(100):
            y = simulate_ar_arch(0.5, 0.5, 400, rng_stream(s, 2))
            u = model_residuals(ar_arch_model(), [0.5, 0.5], y)
            passes += weak_wn_test(u[:1], 3).p_value > 0.05
        assert passes >= 80
