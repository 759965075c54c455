import numpy as np
import pytest

from holonomylab.families import builtin_family, FAMILY_NAMES
from holonomylab.geometry import (
    ChartDomain,
    MetricField,
    c0_connection_distance,
    c1_metric_distance,
    christoffel,
    compatibility_residual,
    curvature,
    levi_civita,
)
from holonomylab.matrices import DomainError, frobenius
from holonomylab.subgroups import standard_complex_structure


def conformal_christoffel_oracle(x, k):
    """Closed-form coefficients of the disk metrics: Gamma from the log factor."""
    x = np.asarray(x, dtype=float)
    dphi = 2.0 * x / (k**2 - x @ x)
    gamma = np.zeros((2, 2, 2))
    for i in range(2):
        for kk in range(2):
            for j in range(2):
                gamma[i, kk, j] = (kk == i) * dphi[j] + (kk == j) * dphi[i] - (i == j) * dphi[kk]
    return gamma


def constant_metric(matrix):
    matrix = np.asarray(matrix, dtype=float)

    def evaluate(pts):
        pts = np.atleast_2d(pts)
        return np.broadcast_to(matrix, (pts.shape[0],) + matrix.shape).copy()

    return MetricField(evaluate=evaluate, dim=matrix.shape[0], derivative=None, label="const")


class TestChartDomain:
    def test_validation(self):
        with pytest.raises(ValueError):
            ChartDomain(lower=np.zeros(2), upper=np.zeros(2), margin=0.1)
        with pytest.raises(ValueError):
            ChartDomain(lower=-np.ones(2), upper=np.ones(2), margin=1.5)

    def test_contains_and_grid(self):
        chart = ChartDomain(lower=-np.ones(2), upper=np.ones(2), margin=0.1)
        assert chart.contains([0.0, 0.0]).all()
        assert not chart.contains([0.95, 0.0]).all()
        grid = chart.interior_grid(5)
        assert grid.shape == (25, 2)
        assert chart.contains(grid).all()
        with pytest.raises(ValueError):
            chart.interior_grid(1)


class TestChristoffel:
    def test_flat_metric_has_no_coefficients(self):
        gamma = christoffel(constant_metric(4.0 * np.eye(2)), np.array([0.1, 0.2]))
        assert frobenius(gamma) < 1e-10

    def test_conformal_oracle_analytic(self, poincare):
        x = np.array([0.2, 0.0])
        gamma = christoffel(poincare.member(2), x)
        assert np.abs(gamma - conformal_christoffel_oracle(x, 2)).max() < 1e-13

    def test_conformal_oracle_finite_difference(self, poincare):
        member = poincare.member(2)
        bare = MetricField(evaluate=member.evaluate, dim=2, derivative=None)
        x = np.array([0.2, 0.0])
        oracle = conformal_christoffel_oracle(x, 2)
        err1 = np.abs(christoffel(bare, x, step=1e-4) - oracle).max()
        err2 = np.abs(christoffel(bare, x, step=5e-5) - oracle).max()
        assert err1 < 1e-8
        assert err1 / err2 == pytest.approx(4.0, rel=0.25)  # second-order differences

    def test_lower_index_symmetry(self, fubini):
        conn = levi_civita(fubini.member(3), fubini.chart)
        pts = fubini.chart.interior_grid(3)
        coeff = conn(pts)  # [m, i, k, j] = Gamma^k_ij
        assert np.abs(coeff - coeff.transpose(0, 3, 2, 1)).max() < 1e-7

    def test_rejects_non_spd(self):
        with pytest.raises(ValueError):
            christoffel(constant_metric(np.diag([1.0, -1.0])), np.zeros(2))


class TestCompatibility:
    def test_levi_civita_of_flat(self):
        metric = constant_metric(np.eye(2))
        chart = ChartDomain(lower=-np.ones(2), upper=np.ones(2), margin=0.05)
        conn = levi_civita(metric, chart)
        assert compatibility_residual(conn, metric, np.zeros(2)) < 1e-12

    def test_levi_civita_of_disk_members(self, poincare):
        for k in (2, 8):
            metric = poincare.member(k)
            conn = levi_civita(metric, poincare.chart)
            for x in ([0.0, 0.0], [0.2, 0.1], [-0.3, 0.25]):
                assert compatibility_residual(conn, metric, np.array(x)) < 1e-6

    def test_non_metric_perturbation_oracle(self):
        # adding eps * E11 to one slot defects compatibility by exactly 2 eps
        from holonomylab.geometry import ConnectionField

        metric = constant_metric(np.eye(2))
        eps = 1e-3

        def coeffs(pts):
            pts = np.atleast_2d(pts)
            out = np.zeros((pts.shape[0], 2, 2, 2))
            out[:, 0, 0, 0] = eps
            return out

        conn = ConnectionField(coefficients=coeffs, fibre_dim=2)
        assert compatibility_residual(conn, metric, np.zeros(2)) == pytest.approx(2 * eps, rel=1e-9)


class TestDistances:
    def test_zero_on_equal_fields(self, poincare):
        conn = levi_civita(poincare.member(4), poincare.chart)
        assert c0_connection_distance(conn, conn, poincare.chart, grid=5) == 0.0
        member = poincare.member(4)
        assert c1_metric_distance(member, member, poincare.chart, grid=5) == 0.0

    def test_disk_connection_distance_decays_quadratically(self, poincare):
        limit_conn = levi_civita(poincare.limit, poincare.chart)
        dists = []
        for k in (4, 8, 16):
            conn = levi_civita(poincare.member(k), poincare.chart)
            dists.append(c0_connection_distance(conn, limit_conn, poincare.chart, grid=9))
        assert dists[0] > dists[1] > dists[2]
        assert dists[0] / dists[1] == pytest.approx(4.0, rel=0.15)
        assert dists[1] / dists[2] == pytest.approx(4.0, rel=0.15)

    def test_constant_offset_field(self, poincare):
        from holonomylab.geometry import ConnectionField

        conn = levi_civita(poincare.member(4), poincare.chart)
        shift = np.array([[0.0, 1.0], [0.5, 0.0]])
        offset = 1e-2

        def coeffs(pts):
            out = conn(np.atleast_2d(pts)).copy()
            out[:, 0] += offset * shift
            return out

        other = ConnectionField(coefficients=coeffs, fibre_dim=2)
        dist = c0_connection_distance(conn, other, poincare.chart, grid=5)
        assert dist == pytest.approx(offset * frobenius(shift), rel=1e-12)

    def test_disk_metric_distance_decays_quadratically(self, poincare):
        dists = [
            c1_metric_distance(poincare.member(k), poincare.limit, poincare.chart, grid=9)
            for k in (4, 8, 16)
        ]
        assert dists[0] > dists[1] > dists[2]
        assert dists[0] / dists[1] == pytest.approx(4.0, rel=0.2)

    def test_doubled_flat_metric(self):
        metric = constant_metric(4.0 * np.eye(2))
        doubled = constant_metric(8.0 * np.eye(2))
        chart = ChartDomain(lower=-np.ones(2), upper=np.ones(2), margin=0.05)
        dist = c1_metric_distance(metric, doubled, chart, grid=5)
        assert dist == pytest.approx(frobenius(4.0 * np.eye(2)), rel=1e-10)


class TestCurvature:
    def test_flat_connection(self):
        metric = constant_metric(np.eye(3))
        chart = ChartDomain(lower=-np.ones(3), upper=np.ones(3), margin=0.05)
        conn = levi_civita(metric, chart)
        assert frobenius(curvature(conn, np.zeros(3))) < 1e-10

    def test_disk_curvature_at_origin(self, poincare):
        # mixed curvature matrix magnitude is the curvature 1/k^2 times the
        # conformal factor 4 at the origin
        for k in (2, 4):
            conn = levi_civita(poincare.member(k), poincare.chart)
            f = curvature(conn, np.zeros(2))
            assert abs(f[0, 1][0, 1]) == pytest.approx(4.0 / k**2, rel=1e-6)
            assert np.abs(f[0, 1] + f[1, 0]).max() < 1e-12

    def test_antisymmetry_random_points(self, fubini):
        conn = levi_civita(fubini.member(2), fubini.chart)
        rng = np.random.default_rng(0)
        x = 0.2 * rng.standard_normal(4)
        f = curvature(conn, x)
        assert np.abs(f + f.transpose(1, 0, 2, 3)).max() < 1e-12

    def test_metric_skewness_of_levi_civita_curvature(self, poincare, fubini):
        for family, x in ((poincare, np.array([0.15, -0.1])), (fubini, 0.1 * np.ones(4))):
            metric = family.member(3)
            conn = levi_civita(metric, family.chart)
            f = curvature(conn, x)
            m = metric(x)
            n = family.chart.dim
            worst = max(
                frobenius(m @ f[i, j] + f[i, j].T @ m) for i in range(n) for j in range(n)
            )
            assert worst < 1e-6


class TestBuiltinFamilies:
    def test_names(self):
        assert set(FAMILY_NAMES) == {
            "poincare2d",
            "flat",
            "product4d",
            "sheared_poincare",
            "fubini_study_chart",
        }

    def test_unknown_rejected(self):
        with pytest.raises(ValueError):
            builtin_family("klein_bottle")

    def test_disk_member_at_origin(self, poincare):
        assert np.allclose(poincare.member(3)(np.zeros(2)), 4.0 * np.eye(2))

    def test_disk_limit_constant(self, poincare):
        pts = poincare.chart.interior_grid(4)
        vals = poincare.limit(pts)
        assert np.allclose(vals, 4.0 * np.eye(2))

    def test_product_member_at_origin(self, product4d):
        assert np.allclose(product4d.member(5)(np.zeros(4)), np.diag([4.0, 4.0, 1.0, 1.0]))

    def test_fubini_metric_is_hermitian_everywhere(self, fubini):
        j = standard_complex_structure(2)
        for k in (1, 3):
            vals = fubini.member(k)(fubini.chart.interior_grid(4))
            assert np.abs(np.einsum("ba,mbc,cd->mad", j, vals, j) - vals).max() < 1e-12

    def test_sheared_member_derivative_matches_finite_difference(self):
        family = builtin_family("sheared_poincare")
        metric = family.member(3)
        x = np.array([0.05, -0.04, 0.08, 0.02])
        analytic = metric.derivative_at(x, step=1e-4)
        bare = MetricField(evaluate=metric.evaluate, dim=4, derivative=None)
        numeric = bare.derivative_at(x, step=1e-4)
        assert np.abs(analytic - numeric).max() < 1e-7

    def test_levi_civita_guards_the_interior(self, poincare):
        conn = levi_civita(poincare.member(2), poincare.chart)
        with pytest.raises(DomainError):
            conn(np.array([0.449, 0.0]))
