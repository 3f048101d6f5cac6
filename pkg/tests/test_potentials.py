import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swarmdim.potentials import (
    InvalidPotential,
    PotentialSpec,
    RepulsionKind,
    SingularPairSignal,
    approx_laplacian_at,
    approx_laplacian_closed_form,
    classify_repulsion,
    eval_gradient,
    eval_laplacian,
    eval_w,
    eval_w_prime,
    eval_w_second,
    validate,
)

PL = PotentialSpec.powerlaw


def _random_spec(rng):
    kind = rng.integers(3)
    if kind == 2:
        return PotentialSpec.tanh(rng.uniform(1, 10), rng.uniform(0.1, 1.0))
    alpha = 0.0 if rng.random() < 0.1 else rng.uniform(-0.9, 3.0)
    gamma = alpha + rng.uniform(0.3, 8.0)
    if kind == 1:
        return PotentialSpec.cosine(alpha, gamma, rng.uniform(0.5, 5.0))
    return PL(alpha, gamma, rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0))


def _w_prime_scale(spec, r):
    # sum of absolute term magnitudes: the size against which cancellation is judged
    if spec.variant == "tanh":
        return abs(math.tanh((1 - r) * spec.a)) + spec.b
    s = spec.coeff_a * r ** (spec.alpha - 1) + spec.coeff_g * r ** (spec.gamma - 1)
    if spec.variant == "cosine":
        s += 1.5
    return s


def _lap_scale(spec, r, n_dim):
    if spec.variant == "tanh":
        return spec.a + (n_dim - 1) * _w_prime_scale(spec, r) / r
    s = (spec.coeff_a * abs(spec.alpha + n_dim - 2) * r ** (spec.alpha - 2)
         + spec.coeff_g * abs(spec.gamma + n_dim - 2) * r ** (spec.gamma - 2))
    if spec.variant == "cosine":
        s += 1.5 * spec.p + (n_dim - 1) * 1.5 / r
    return s


class TestEvalW:
    def test_direct_substitution(self):
        assert eval_w(PL(2, 4), 1.0) == pytest.approx(-0.25, abs=1e-15)

    def test_origin_value_positive_alpha(self):
        assert eval_w(PL(2.5, 15), 0.0) == 0.0

    def test_origin_value_singular(self):
        assert eval_w(PL(-0.5, 5), 0.0) == math.inf
        assert eval_w(PL(0.0, 5), 0.0) == math.inf

    def test_log_convention(self):
        # alpha = 0 term is -log r, gamma = 0 term is +log r
        r = 2.7
        assert eval_w(PL(0.0, 3.0), r) == pytest.approx(-math.log(r) + r ** 3 / 3, rel=1e-14)
        assert eval_w(PL(-1.0, 0.0), r) == pytest.approx(r ** -1 + math.log(r), rel=1e-14)

    def test_cosine_adds_scaled_cosine(self):
        s = PotentialSpec.cosine(1.5, 2.0, 3.0)
        for r in (0.3, 1.0, 2.2):
            expect = -r ** 1.5 / 1.5 + r ** 2 / 2 + 0.5 * math.cos(3 * r)
            assert eval_w(s, r) == pytest.approx(expect, rel=1e-14)

    def test_tanh_closed_form_matches_quadrature(self):
        from scipy.integrate import quad
        s = PotentialSpec.tanh(5.0, 0.5)
        assert eval_w(s, 0.0) == 0.0
        for r in (0.2, 1.0, 1.7):
            ref = -quad(lambda t: math.tanh((1 - t) * 5.0) + 0.5, 0, r, epsabs=1e-14)[0]
            assert eval_w(s, r) == pytest.approx(ref, abs=1e-12)

    def test_array_input(self):
        r = np.array([0.5, 1.0, 2.0])
        np.testing.assert_allclose(eval_w(PL(2, 4), r), -r ** 2 / 2 + r ** 4 / 4, rtol=1e-14)

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            eval_w(PL(2, 4), -1.0)

    def test_invalid_spec_rejected(self):
        with pytest.raises(InvalidPotential):
            eval_w(PL(5, 2), 1.0)


class TestDerivatives:
    def test_equilibrium_distance(self):
        assert eval_w_prime(PL(1.5, 7), 1.0) == 0.0

    def test_tanh_at_one(self):
        assert eval_w_prime(PotentialSpec.tanh(5, 0.5), 1.0) == -0.5

    def test_substitution(self):
        assert eval_w_prime(PL(2, 4), 2.0) == pytest.approx(6.0, rel=1e-15)

    def test_origin_is_domain_error(self):
        with pytest.raises(SingularPairSignal):
            eval_w_prime(PL(2, 4), 0.0)
        with pytest.raises(SingularPairSignal):
            eval_w_second(PL(2, 4), 0.0)

    def test_second_derivative_by_differences(self, rng):
        for _ in range(200):
            s = _random_spec(rng)
            r = rng.uniform(0.2, 3.0)
            h = 1e-5 * r
            fd = (eval_w_prime(s, r + h) - eval_w_prime(s, r - h)) / (2 * h)
            scale = _lap_scale(s, r, 1)
            assert abs(fd - eval_w_second(s, r)) < 1e-6 * scale


class TestGradient:
    def test_equilibrium(self):
        np.testing.assert_array_equal(eval_gradient(PL(2, 4), [1.0, 0.0]), [0.0, 0.0])

    def test_radial_scaling(self):
        np.testing.assert_allclose(eval_gradient(PL(2, 4), [2.0, 0.0]), [6.0, 0.0], rtol=1e-15)

    def test_origin_signals(self):
        with pytest.raises(SingularPairSignal):
            eval_gradient(PL(2, 4), [0.0, 0.0])

    def test_odd_exactly(self, rng):
        for _ in range(300):
            s = _random_spec(rng)
            x = rng.normal(size=rng.integers(1, 4)) * rng.uniform(0.1, 5)
            np.testing.assert_array_equal(eval_gradient(s, -x), -eval_gradient(s, x))

    def test_finite_differences_1000_cases(self, rng):
        worst = 0.0
        for _ in range(1000):
            s = _random_spec(rng)
            n_dim = int(rng.integers(1, 4))
            u = rng.normal(size=n_dim)
            x = u / np.linalg.norm(u) * math.exp(rng.uniform(math.log(0.1), math.log(10)))
            r = np.linalg.norm(x)
            h = 1e-5 * r
            fd = np.empty(n_dim)
            for k in range(n_dim):
                e = np.zeros(n_dim)
                e[k] = h
                fd[k] = (eval_w(s, np.linalg.norm(x + e)) - eval_w(s, np.linalg.norm(x - e))) / (2 * h)
            g = eval_gradient(s, x)
            err = np.linalg.norm(fd - g) / max(np.linalg.norm(g), _w_prime_scale(s, r))
            worst = max(worst, err)
        assert worst < 1e-6


class TestLaplacian:
    def test_substitution(self):
        assert eval_laplacian(PL(1.5, 2), [1.0, 0.0]) == pytest.approx(0.5, rel=1e-14)

    def test_singular_growth_near_origin(self):
        for r in (1e-4, 1e-6):
            lap = eval_laplacian(PL(0.5, 5), [r, 0.0])
            assert lap / (-0.5 * r ** -1.5) == pytest.approx(1.0, rel=1e-6)

    def test_radial_symmetry(self, rng):
        s = PL(0.7, 4.0)
        ref = eval_laplacian(s, [1.3, 0.0, 0.0])
        for _ in range(20):
            u = rng.normal(size=3)
            assert eval_laplacian(s, 1.3 * u / np.linalg.norm(u)) == pytest.approx(ref, rel=1e-13)

    def test_origin_is_domain_error(self):
        with pytest.raises(SingularPairSignal):
            eval_laplacian(PL(1.5, 2), [0.0, 0.0])

    def test_divergence_of_gradient(self, rng):
        for _ in range(300):
            s = _random_spec(rng)
            n_dim = int(rng.integers(1, 4))
            u = rng.normal(size=n_dim)
            r = math.exp(rng.uniform(math.log(0.2), math.log(5)))
            x = u / np.linalg.norm(u) * r
            h = 1e-4 * r
            div = 0.0
            for k in range(n_dim):
                e = np.zeros(n_dim)
                e[k] = h
                div += (eval_gradient(s, x + e)[k] - eval_gradient(s, x - e)[k]) / (2 * h)
            lap = eval_laplacian(s, x)
            assert abs(div - lap) < 1e-4 * max(abs(lap), _lap_scale(s, r, n_dim))


class TestApproxLaplacian:
    @staticmethod
    def _pure_h_alpha(alpha, n_dim, eps, gamma=4.0):
        # ball average is linear: remove the exact r^gamma/gamma contribution
        approx = approx_laplacian_at(PL(alpha, gamma), np.zeros(n_dim), eps)
        g_part = 2 * (n_dim + 2) / eps ** 2 * n_dim / (n_dim + gamma) * eps ** gamma / gamma
        return approx - g_part

    def test_quadratic_is_exact(self):
        for eps in (0.05, 0.3, 1.0):
            assert self._pure_h_alpha(2.0, 2, eps) == pytest.approx(-2.0, rel=1e-12)

    def test_closed_form_value(self):
        assert approx_laplacian_closed_form(1.0, 2, 0.1) == pytest.approx(160.0 / 3.0, rel=1e-14)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    @pytest.mark.parametrize("n_dim", [2, 3])
    @pytest.mark.parametrize("eps", [0.05, 0.1])
    def test_quadrature_vs_closed_form(self, alpha, n_dim, eps):
        got = -self._pure_h_alpha(alpha, n_dim, eps)
        assert got == pytest.approx(approx_laplacian_closed_form(alpha, n_dim, eps), rel=1e-2)

    def test_smooth_point_matches_analytic_laplacian(self):
        s = PL(1.5, 4.0)
        x = np.array([1.1, -0.4])
        assert approx_laplacian_at(s, x, 1e-2) == pytest.approx(eval_laplacian(s, x), rel=1e-3)

    def test_one_dimension(self):
        # the cubic part of the Taylor expansion averages out; the error is O(eps^2)
        s = PL(1.5, 4.0)
        assert approx_laplacian_at(s, [0.8], 1e-3) == pytest.approx(eval_laplacian(s, [0.8]), rel=1e-5)

    def test_infinite_value_gives_minus_inf(self):
        assert approx_laplacian_at(PL(-0.5, 5), [0.0, 0.0], 0.1) == -math.inf

    def test_eps_must_be_positive(self):
        with pytest.raises(ValueError):
            approx_laplacian_at(PL(1.5, 4.0), [0.0, 0.0], 0.0)


class TestClassification:
    def test_strong(self):
        rc = classify_repulsion(PL(0.5, 5), 2)
        assert rc.kind is RepulsionKind.STRONG and rc.beta == pytest.approx(1.5)
        assert rc.predicted_dim_lower_bound == pytest.approx(1.5)

    def test_mild(self):
        rc = classify_repulsion(PL(2.5, 15), 2)
        assert rc.kind is RepulsionKind.MILD
        assert rc.predicted_dim_lower_bound == 0.0
        assert "predicted dim 0" in rc.describe()

    def test_strong_3d(self):
        rc = classify_repulsion(PL(-0.5, 5), 3)
        assert rc.kind is RepulsionKind.STRONG and rc.beta == pytest.approx(2.5)

    def test_borderline(self):
        assert classify_repulsion(PL(2.0, 4.0), 2).kind is RepulsionKind.BORDERLINE

    def test_invalid(self):
        assert classify_repulsion(PL(-0.5, 5), 2).kind is RepulsionKind.INVALID  # beta >= N
        assert classify_repulsion(PL(-3.5, 5), 3).kind is RepulsionKind.INVALID  # alpha <= -N

    @given(alpha=st.floats(-2.9, 4.0), gap=st.floats(0.1, 10), p=st.floats(0.5, 6),
           n_dim=st.sampled_from([1, 2, 3]))
    @settings(max_examples=200, deadline=None)
    def test_pure_function_of_alpha_and_dim(self, alpha, gap, p, n_dim):
        a = classify_repulsion(PL(alpha, alpha + gap), n_dim)
        b = classify_repulsion(PL(alpha, alpha + 2 * gap, 3.0, 0.5), n_dim)
        c = classify_repulsion(PotentialSpec.cosine(alpha, alpha + gap, p), n_dim)
        assert a == b == c
        if a.kind is RepulsionKind.STRONG:
            assert 2 - n_dim < alpha < 2
            assert 0 < a.beta <= n_dim  # 2 - alpha rounds to N for alpha ~ 1e-70


class TestValidate:
    def test_valid(self):
        assert validate(PL(1.5, 7), 2) == []

    def test_ordering(self):
        problems = validate(PL(5, 2))
        assert len(problems) == 1 and "alpha<gamma violated" in problems[0]

    def test_integrability(self):
        problems = validate(PL(-2.5, 5), 2)
        assert len(problems) == 1 and "local integrability violated" in problems[0]

    def test_coefficients_and_tanh(self):
        assert validate(PL(1, 2, coeff_a=-1.0))
        assert validate(PotentialSpec.tanh(0.0, 0.5))
        assert validate(PotentialSpec.tanh(5.0, -0.1))
        assert validate(PotentialSpec.cosine(1, 2, 0.0))

    def test_dict_round_trip(self):
        for s in (PL(0.5, 5), PotentialSpec.cosine(1.5, 2, 3), PotentialSpec.tanh()):
            assert PotentialSpec.from_dict(s.to_dict()) == s
