import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import special_ortho_group

from swarmdim.diagnostics import (
    DimensionReport,
    classify_dimension,
    cluster_decomposition,
    correlation_integral,
    estimate_correlation_dimension,
    euler_lagrange_check,
    local_dimensions,
    radial_histogram,
    riesz_energy,
)
from swarmdim.energy import ParticleConfiguration, SingularPair, total_energy
from swarmdim.io import report_schema
from swarmdim.minimize import init_configuration, minimize
from swarmdim.potentials import PotentialSpec, eval_w

PL = PotentialSpec.powerlaw


def circle(n, rng):
    t = rng.uniform(0, 2 * math.pi, n)
    return ParticleConfiguration(np.column_stack([np.cos(t), np.sin(t)]))


def disk(n, rng):
    r = np.sqrt(rng.random(n))
    t = rng.uniform(0, 2 * math.pi, n)
    return ParticleConfiguration(np.column_stack([r * np.cos(t), r * np.sin(t)]))


def point_clusters(n, rng, k=3, sigma=1e-6, dim=2):
    centres = np.array([[math.cos(2 * math.pi * i / k), math.sin(2 * math.pi * i / k)]
                        + [0.0] * (dim - 2) for i in range(k)])
    return ParticleConfiguration(centres[np.arange(n) % k] + sigma * rng.normal(size=(n, dim)))


def sphere(n, rng):
    u = rng.normal(size=(n, 3))
    return ParticleConfiguration(u / np.linalg.norm(u, axis=1, keepdims=True))


class TestCorrelationIntegral:
    def test_limits(self, rng):
        c = disk(100, rng)
        C = correlation_integral(c, [1e-9, 10.0])
        assert C[0] == 0.0 and C[1] == 1.0

    def test_brute_force_at_median(self, rng):
        X = rng.normal(size=(200, 2))
        d = [math.dist(X[i], X[j]) for i in range(200) for j in range(i + 1, 200)]
        r = float(np.median(d))
        ref = sum(x < r for x in d) / len(d)
        assert correlation_integral(ParticleConfiguration(X), [r])[0] == ref

    def test_non_decreasing(self, rng):
        C = correlation_integral(disk(300, rng), np.geomspace(1e-3, 3, 50))
        assert np.all(np.diff(C) >= 0)

    def test_needs_two(self):
        with pytest.raises(ValueError):
            correlation_integral(ParticleConfiguration([[0.0]]), [1.0])


class TestCorrelationDimension:
    def test_circle(self, rng):
        assert abs(estimate_correlation_dimension(circle(1000, rng)).corr_dim - 1.0) <= 0.15

    def test_disk(self, rng):
        assert abs(estimate_correlation_dimension(disk(1000, rng)).corr_dim - 2.0) <= 0.2

    def test_point_clusters(self, rng):
        assert estimate_correlation_dimension(point_clusters(1000, rng)).corr_dim <= 0.2

    def test_degenerate(self):
        with pytest.warns(UserWarning):
            fit = estimate_correlation_dimension(ParticleConfiguration(np.zeros((5, 2))))
        assert fit.corr_dim == 0.0 and fit.fit_r2 == 1.0

    def test_explicit_range(self, rng):
        fit = estimate_correlation_dimension(disk(1000, rng), fit_range=(0.05, 0.2))
        assert fit.fit_range == (0.05, 0.2) and abs(fit.corr_dim - 2.0) < 0.2
        with pytest.raises(ValueError):
            estimate_correlation_dimension(disk(100, rng), fit_range=(0.2, 0.1))

    def test_invariances(self, rng):
        c = disk(1000, rng)
        base = estimate_correlation_dimension(c).corr_dim
        R = special_ortho_group.rvs(2, random_state=3)
        for X in (c.positions + [3.0, -1.0], c.positions @ R.T, 7.5 * c.positions):
            assert estimate_correlation_dimension(c.with_positions(X)).corr_dim == \
                pytest.approx(base, abs=1e-10)

    def test_clipped(self, rng):
        fit = estimate_correlation_dimension(ParticleConfiguration(rng.normal(size=(400, 1))))
        assert 0.0 <= fit.corr_dim <= 1.5


class TestClusters:
    def test_two_points(self):
        c = ParticleConfiguration([[0.0], [5.0]])
        assert len(cluster_decomposition(c, 1.0)) == 2
        assert len(cluster_decomposition(c, 10.0)) == 1

    def test_three_tight_clusters(self, rng):
        centres = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.9]])
        X = centres[np.arange(90) % 3] + 1e-4 * rng.uniform(-1, 1, size=(90, 2))
        cl = cluster_decomposition(ParticleConfiguration(X), 0.01)
        assert len(cl) == 3
        assert [sorted(c.indices % 3) for c in cl] == [[k] * 30 for k in range(3)]
        for c, ctr in zip(cl, centres):
            np.testing.assert_allclose(c.centroid, ctr, atol=1e-4)
            assert c.diameter < 3e-4

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 60), st.floats(0.01, 1.0), st.floats(1.0, 3.0), st.integers(0, 10**6))
    def test_partition_and_coarsening(self, n, d1, factor, seed):
        c = ParticleConfiguration(np.random.default_rng(seed).random((n, 2)))
        fine = cluster_decomposition(c, d1)
        coarse = cluster_decomposition(c, d1 * factor)
        allidx = np.sort(np.concatenate([k.indices for k in fine]))
        np.testing.assert_array_equal(allidx, np.arange(n))
        owner = np.empty(n, int)
        for k, cl in enumerate(coarse):
            owner[cl.indices] = k
        assert all(len(set(owner[cl.indices])) == 1 for cl in fine)

    def test_bad_link(self):
        with pytest.raises(ValueError):
            cluster_decomposition(ParticleConfiguration([[0.0]]), 0.0)


class TestRiesz:
    def test_two_particles(self):
        c = ParticleConfiguration([[0.0], [1.0]])
        assert riesz_energy(c, 1.0) == 0.5
        assert riesz_energy(c, 0.0) == 0.5

    def test_s_zero_mass_identity(self, rng):
        m = rng.random(7)
        m /= m.sum()
        c = ParticleConfiguration(rng.normal(size=(7, 2)), m)
        assert riesz_energy(c, 0.0) == pytest.approx(1 - (m ** 2).sum(), rel=1e-14)

    def test_brute_force(self, rng):
        c = disk(500, rng)
        X, m = c.positions, c.masses
        ref = 0.0
        for i in range(500):
            d = np.linalg.norm(X - X[i], axis=1)
            d[i] = np.inf
            ref += m[i] * float(np.sum(m * d ** -1.5))
        assert riesz_energy(c, 1.5) == pytest.approx(ref, rel=1e-12)

    def test_coincident_is_inf(self):
        assert riesz_energy(ParticleConfiguration([[0.0], [0.0], [1.0]]), 1.0) == math.inf

    def test_monotone_in_s(self, rng):
        small = ParticleConfiguration(0.3 * rng.random((20, 2)))
        big = ParticleConfiguration(10 * np.arange(20)[:, None] + rng.random((20, 1)) * 2)
        s = np.linspace(0.1, 3, 12)
        assert np.all(np.diff([riesz_energy(small, x) for x in s]) > 0)
        assert np.all(np.diff([riesz_energy(big, x) for x in s]) < 0)


class TestLocalAndRadial:
    def test_local_dimensions_of_shapes(self, rng):
        assert np.mean(local_dimensions(circle(800, rng)) == 1) > 0.95
        assert np.mean(local_dimensions(disk(800, rng)) == 2) > 0.95
        assert np.mean(local_dimensions(sphere(1000, rng)) == 2) > 0.9

    def test_exact_sphere_single_bin(self):
        pts = np.array(list(itertools.product([-1.0, 1.0], repeat=3))) / math.sqrt(3)
        h = radial_histogram(ParticleConfiguration(pts), bins=40)
        assert h[h[:, 1] > 0].shape[0] == 1 and h[-1, 1] == 8

    def test_single_particle(self):
        np.testing.assert_array_equal(radial_histogram(ParticleConfiguration([[1.0, 2.0]])),
                                      [[0.0, 1.0]])

    def test_shape_and_mass(self, rng):
        h = radial_histogram(disk(400, rng), bins=40)
        assert h.shape == (40, 2) and h[:, 1].sum() == 400


class TestClassify:
    def test_refuses_small(self):
        rep = classify_dimension(ParticleConfiguration(np.eye(3)[:, :2] * [1, 2]))
        assert rep.refused and rep.classified_dim is None

    @pytest.mark.parametrize("shape,dim,expected", [(circle, 2, 1), (disk, 2, 2), (sphere, 3, 2)])
    def test_shapes(self, shape, dim, expected, rng):
        assert classify_dimension(shape(1000, rng)).classified_dim == expected

    def test_ball(self):
        assert classify_dimension(init_configuration(1500, 3, seed=1)).classified_dim == 3

    def test_point_clusters(self, rng):
        rep = classify_dimension(point_clusters(600, rng), PL(2.5, 15))
        assert rep.classified_dim == 0 and rep.cluster_count == 3 < rep.n
        assert rep.beta_lower_bound == 0.0

    def test_all_coincident(self):
        rep = classify_dimension(ParticleConfiguration(np.zeros((20, 2))))
        assert rep.classified_dim == 0 and rep.cluster_count == 1

    def test_mixed_ball_in_shell(self, rng):
        # a small filled ball inside a large shell is three-dimensional
        ball = init_configuration(100, 3, radius=0.3, seed=2).positions
        shell = sphere(900, rng).positions
        rep = classify_dimension(ParticleConfiguration(np.vstack([ball, shell])))
        assert rep.classified_dim == 3

    def test_report_round_trip(self, rng):
        rep = classify_dimension(disk(200, rng), PL(1.5, 2))
        d = json.loads(json.dumps(rep.to_dict()))
        back = DimensionReport.from_dict(d)
        assert back.classified_dim == rep.classified_dim and back.corr_dim == rep.corr_dim
        np.testing.assert_array_equal(back.radial_histogram, rep.radial_histogram)

    def test_invariant_corr_dim_bounds(self, rng):
        for c in (circle(300, rng), disk(300, rng), point_clusters(300, rng)):
            rep = classify_dimension(c)
            assert 0 <= rep.corr_dim <= 2.5


class TestEulerLagrange:
    def test_two_body_equilibrium(self):
        c = ParticleConfiguration([[0.0], [1.0]])
        # the default link (twice the spacing) would swallow the whole sampling ball
        rep = euler_lagrange_check(c, PL(2, 4), tol=1e-9, link_distance=0.05)
        np.testing.assert_array_equal(rep.v_values, [-0.125, -0.125])
        assert rep.two_E == -0.125 == 2 * total_energy(c, PL(2, 4))
        assert np.all(rep.per_component_stddev == 0)
        assert rep.off_support_violations == 0 and rep.off_support_samples > 0

    def test_unequal_two_dirac_violates(self):
        # unequal masses: V differs between the two atoms, so relocating mass helps
        c = ParticleConfiguration([[0.0], [1.0]], [0.3, 0.7])
        rep = euler_lagrange_check(c, PL(2, 4), tol=1e-9)
        assert rep.v_values[0] == pytest.approx(0.7 * eval_w(PL(2, 4), 1.0), rel=1e-15)
        assert rep.v_values[1] == pytest.approx(0.3 * eval_w(PL(2, 4), 1.0), rel=1e-15)
        assert not np.isclose(rep.v_values[0], rep.two_E)

    def test_translation_invariant(self):
        spec = PL(1.5, 7.0)
        c, _ = minimize(init_configuration(40, 2, seed=3), spec)
        a = euler_lagrange_check(c, spec)
        b = euler_lagrange_check(c.with_positions(c.positions + [2.0, -5.0]), spec)
        np.testing.assert_allclose(a.v_values, b.v_values, rtol=1e-12)
        assert a.off_support_violations == b.off_support_violations
        assert a.laplacian_min == pytest.approx(b.laplacian_min, rel=1e-10)

    def test_singular_coincident(self):
        c = ParticleConfiguration([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
        with pytest.raises(SingularPair):
            euler_lagrange_check(c, PL(-0.5, 5.0))

    def test_converged_cluster_state(self):
        spec = PL(2.5, 15)
        c, _ = minimize(init_configuration(60, 2, seed=4), spec)
        rep = euler_lagrange_check(c, spec)
        assert rep.max_relative_stddev < 1e-3
        assert rep.off_support_violations <= rep.off_support_samples
        assert 0.0 <= rep.violation_fraction <= 1.0

    def test_laplacian_matches_formula(self):
        # two particles at distance r in 2D: Lap W = w'' + w'/r, self-excluded mass 1/2
        spec = PL(1.5, 7.0)
        c = ParticleConfiguration([[0.0, 0.0], [0.8, 0.0]])
        r = 0.8
        lap = -(0.5) * r ** -0.5 + 6 * r ** 5 + (-(r ** 0.5) + r ** 6) / r
        rep = euler_lagrange_check(c, spec, n_off_samples=0)
        assert rep.laplacian_min == pytest.approx(0.5 * lap, rel=1e-12)
        assert rep.off_support_samples == 0

    def test_serializes_against_schema(self):
        jsonschema = pytest.importorskip("jsonschema")
        c = ParticleConfiguration([[0.0], [1.0]])
        rep = euler_lagrange_check(c, PL(2, 4))
        sub = {"$defs": report_schema()["$defs"], "$ref": "#/$defs/euler_lagrange"}
        jsonschema.validate(json.loads(json.dumps(rep.to_dict())), sub)
