"""Tests for the noise-aware recurrent cell."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crae.rrn import (RHO_0, RHO_1, RrnParams, kappa, robust_sigmoid_mean, robust_sigmoid_var, robust_tanh_mean,
                      rrn_backprop, rrn_forward, rrn_step, tanh_scale)

GH_X, GH_W = np.polynomial.hermite.hermgauss(64)


def gh_expect(f, mu, lam):
    """E[f(x)] for x ~ N(mu, 1/lam) by 64-node Gauss-Hermite quadrature."""
    z = mu + math.sqrt(2.0 / lam) * GH_X
    return float((GH_W * f(z)).sum() / math.sqrt(math.pi))


def sigm(z):
    return 1.0 / (1.0 + np.exp(-z))


class TestScales:
    """Closed-form shrinkage factors."""

    def test_frozen_values(self):
        # 30-digit mpmath evaluations of (1 + pi/8/lam)^-1/2 and (1/4 + pi/8/lam)^-1/2
        assert kappa(1.0) == pytest.approx(0.847366626600631359, abs=1e-15)
        assert kappa(0.5) == pytest.approx(0.748397724149103340, abs=1e-15)
        assert tanh_scale(1.0) == pytest.approx(1.247372485905221032, abs=1e-15)
        assert tanh_scale(0.5) == pytest.approx(0.982757359687982911, abs=1e-15)

    def test_noise_free_limit(self):
        assert kappa(math.inf) == 1.0
        assert tanh_scale(math.inf) == 2.0
        mu = np.linspace(-5, 5, 41)
        np.testing.assert_allclose(robust_sigmoid_mean(mu, math.inf), sigm(mu), atol=1e-15)
        np.testing.assert_allclose(robust_tanh_mean(mu, math.inf), np.tanh(mu), atol=1e-14)
        np.testing.assert_array_equal(robust_sigmoid_var(mu, math.inf), 0.0)

    def test_constants(self):
        assert RHO_1 == pytest.approx(4 - 2 * math.sqrt(2))
        assert RHO_0 == pytest.approx(-math.log(math.sqrt(2) + 1))

    @pytest.mark.parametrize("lam", [0.0, -1.0, float("nan")])
    def test_invalid_precision(self, lam):
        with pytest.raises(ValueError):
            kappa(lam)

    def test_monotone_in_precision(self):
        lams = [0.1, 0.5, 1, 10, 100, 1e4]
        ks = [kappa(l) for l in lams]
        cs = [tanh_scale(l) for l in lams]
        assert all(a < b for a, b in zip(ks, ks[1:]))
        assert all(a < b for a, b in zip(cs, cs[1:]))


class TestRobustMeansAgainstQuadrature:
    """Moment-matched means against numerically integrated truth."""

    def test_mpmath_reference_point(self):
        # adaptive mpmath quadrature of E[sigmoid(x)], E[tanh(x)] for x ~ N(1, 1)
        assert abs(robust_sigmoid_mean(1.0, 1.0) - 0.696734670143683288) < 0.004
        assert abs(robust_tanh_mean(1.0, 1.0) - 0.550400490793327170) < 0.004

    def test_quadrature_agrees_with_reference(self):
        assert gh_expect(sigm, 1.0, 1.0) == pytest.approx(0.696734670143683288, abs=1e-10)
        assert gh_expect(np.tanh, 1.0, 1.0) == pytest.approx(0.550400490793327170, abs=1e-8)

    @pytest.mark.parametrize("lam", [0.5, 1.0, 10.0, 100.0])
    def test_grid(self, lam):
        for mu in np.linspace(-3, 3, 25):
            assert abs(robust_sigmoid_mean(mu, lam) - gh_expect(sigm, mu, lam)) <= 0.02
            assert abs(robust_tanh_mean(mu, lam) - gh_expect(np.tanh, mu, lam)) <= 0.03

    @pytest.mark.parametrize("lam", [0.5, 1.0, 10.0, 100.0])
    def test_exact_variance_diagnostic(self, lam):
        for mu in np.linspace(-3, 3, 25):
            truth = gh_expect(lambda z: sigm(z) ** 2, mu, lam) - gh_expect(sigm, mu, lam) ** 2
            assert abs(robust_sigmoid_var(mu, lam, exact=True) - truth) < 0.03

    def test_variance_stand_in(self):
        np.testing.assert_array_equal(robust_sigmoid_var(np.zeros(3), 4.0), 0.25)

    @given(st.floats(-50, 50), st.floats(0.01, 1e6))
    def test_odd_symmetry_and_range(self, mu, lam):
        s, sm = robust_sigmoid_mean(mu, lam), robust_sigmoid_mean(-mu, lam)
        assert s + sm == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= s <= 1.0
        t = robust_tanh_mean(mu, lam)
        assert t == pytest.approx(-robust_tanh_mean(-mu, lam), abs=1e-12)
        assert -1.0 <= t <= 1.0


def _lstm_oracle(xs, p: RrnParams, h0, s0):
    """Textbook LSTM loop, element by element."""
    k = p.dim
    h, s = list(h0), list(s0)
    hs, ss = [], []
    for x in xs:
        new_s, new_h = [], []
        for j in range(k):
            z = [sum(p.Y[g, j, m] * x[m] for m in range(k)) + sum(p.W[g, j, m] * h[m] for m in range(k)) + p.b[g, j]
                 for g in range(4)]
            a = math.tanh(z[0])
            i, f, o = (1 / (1 + math.exp(-v)) for v in z[1:])
            sj = f * s[j] + i * a
            new_s.append(sj)
            new_h.append(o * math.tanh(sj))
        h, s = new_h, new_s
        hs.append(h)
        ss.append(s)
    return np.array(hs), np.array(ss)


def _params(k, S, lam, seed=0, sigma_candidate=False, scale=0.6):
    rng = np.random.default_rng(seed)
    return RrnParams(rng.normal(0, 1, (k, S)), rng.normal(0, scale, (4, k, k)), rng.normal(0, scale, (4, k, k)),
                     rng.normal(0, scale, (4, k)), lam, sigma_candidate)


class TestCellForward:
    """Forward recursion."""

    def test_noise_free_matches_lstm(self):
        p = _params(3, 5, math.inf, seed=1)
        rng = np.random.default_rng(2)
        xs = rng.normal(size=(4, 3))
        h0, s0 = rng.normal(size=3), rng.normal(size=3)
        states = rrn_forward(xs, p, h0, s0)
        hs, ss = _lstm_oracle(xs, p, h0, s0)
        np.testing.assert_allclose([st.h for st in states], hs, atol=1e-13)
        np.testing.assert_allclose([st.s for st in states], ss, atol=1e-13)

    def test_single_step_formula(self):
        p = _params(2, 3, 5.0, seed=3)
        x, h, s = np.array([0.3, -0.2]), np.array([0.1, 0.4]), np.array([-0.5, 0.2])
        st = rrn_step(x, h, s, p)
        pre = np.einsum("gij,j->gi", p.Y, x) + np.einsum("gij,j->gi", p.W, h) + p.b
        k, c = kappa(5.0), tanh_scale(5.0)
        a = 2 * sigm(c * pre[0]) - 1
        i, f, o = sigm(k * pre[1:])
        s_new = f * s + i * a
        np.testing.assert_allclose(st.pre, pre, atol=1e-15)
        np.testing.assert_allclose(st.s, s_new, atol=1e-15)
        np.testing.assert_allclose(st.h, o * (2 * sigm(c * s_new) - 1), atol=1e-15)

    def test_sigma_candidate(self):
        p = _params(2, 3, 5.0, seed=3, sigma_candidate=True)
        st = rrn_step(np.ones(2), np.zeros(2), np.zeros(2), p)
        np.testing.assert_allclose(st.gates[0], sigm(kappa(5.0) * st.pre[0]))

    def test_zero_weights_give_zero_state(self):
        p = RrnParams.zeros(4, 6)
        states = rrn_forward(np.zeros((5, 4)), p)
        for st in states:
            np.testing.assert_array_equal(st.h, 0.0)
            np.testing.assert_array_equal(st.s, 0.0)

    def test_shape_validation(self):
        p = RrnParams.zeros(3, 4)
        with pytest.raises(ValueError):
            rrn_step(np.zeros(2), np.zeros(3), np.zeros(3), p)
        with pytest.raises(ValueError):
            RrnParams(np.zeros((3, 4)), np.zeros((4, 3, 2)), np.zeros((4, 3, 3)), np.zeros((4, 3)))

    def test_init(self):
        p = RrnParams.init(100, 7, np.random.default_rng(0))
        np.testing.assert_array_equal(p.b[2], 1.0)
        np.testing.assert_array_equal(p.b[[0, 1, 3]], 0.0)
        assert p.Y.std() == pytest.approx(0.1, rel=0.02)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.sampled_from([0.5, 10.0, math.inf]))
    def test_bounded_outputs(self, seed, lam):
        p = _params(3, 4, lam, seed=seed, scale=3.0)
        xs = np.random.default_rng(seed).normal(0, 5, (6, 3))
        for t, st in enumerate(rrn_forward(xs, p)):
            assert np.all(np.abs(st.h) < 1.0)
            assert np.all(np.abs(st.s) <= t + 1)


class TestBackprop:
    """BPTT against central differences."""

    @pytest.mark.parametrize("lam,sigma_candidate", [(3.0, False), (math.inf, False), (0.7, True)])
    def test_finite_differences(self, lam, sigma_candidate):
        k, T = 3, 4
        p = _params(k, 5, lam, seed=11, sigma_candidate=sigma_candidate)
        rng = np.random.default_rng(12)
        xs = rng.normal(size=(T, k))
        h0, s0 = rng.normal(size=k), rng.normal(size=k)
        ch, cs = rng.normal(size=(T, k)), rng.normal(size=(T, k))

        def loss():
            states = rrn_forward(xs, p, h0, s0)
            return sum((ch[t] * st.h).sum() + (cs[t] * st.s).sum() for t, st in enumerate(states))

        g = rrn_backprop(rrn_forward(xs, p, h0, s0), p, ch, cs)
        eps = 1e-6
        for arr, grad in [(p.Y, g.Y), (p.W, g.W), (p.b, g.b), (xs, g.dx), (h0, g.dh0), (s0, g.ds0)]:
            num = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + eps
                up = loss()
                arr[idx] = old - eps
                down = loss()
                arr[idx] = old
                num[idx] = (up - down) / (2 * eps)
            np.testing.assert_allclose(grad, num, rtol=1e-6, atol=1e-8)

    def test_shape_validation(self):
        p = RrnParams.zeros(2, 3)
        states = rrn_forward(np.zeros((3, 2)), p)
        with pytest.raises(ValueError):
            rrn_backprop(states, p, np.zeros((2, 2)))
