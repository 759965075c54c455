import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holonomylab.matrices import (
    DomainError,
    SqrtFrame,
    frobenius,
    operator_norm,
    principal_log,
    random_rotation,
    representing_endomorphism,
    so_residual,
    sym_sqrt,
)

from conftest import random_skew, random_spd, series_exp


def rotation2(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


class TestRepresentingEndomorphism:
    def test_identity_case(self):
        g = random_spd(np.random.default_rng(0), 3)
        assert np.allclose(representing_endomorphism(g, g), np.eye(3), atol=1e-12)

    def test_scaling(self):
        g = random_spd(np.random.default_rng(1), 3)
        assert np.allclose(representing_endomorphism(2.0 * g, g), 2.0 * np.eye(3), atol=1e-12)

    def test_brute_force_over_basis_pairs(self):
        rng = np.random.default_rng(2)
        q = random_spd(rng, 4) - 2.0 * np.eye(4)  # symmetric, not necessarily definite
        g = random_spd(rng, 4)
        z = representing_endomorphism(q, g)
        for i in range(4):
            for j in range(4):
                # g(e_i, Z e_j) must reproduce q(e_i, e_j)
                assert (g @ z)[i, j] == pytest.approx(q[i, j], abs=1e-10)

    def test_rejects_non_symmetric_form(self):
        with pytest.raises(ValueError):
            representing_endomorphism(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2))

    def test_rejects_singular_metric(self):
        with pytest.raises(ValueError):
            representing_endomorphism(np.eye(2), np.diag([1.0, 0.0]))


class TestOperatorNorm:
    def test_identity(self):
        g = random_spd(np.random.default_rng(3), 3)
        assert operator_norm(np.eye(3), g) == pytest.approx(1.0, abs=1e-12)

    def test_scaled_identity(self):
        g = random_spd(np.random.default_rng(4), 3)
        assert operator_norm(3.0 * np.eye(3), g) == pytest.approx(3.0, abs=1e-12)

    def test_sampled_maximization_oracle(self):
        rng = np.random.default_rng(5)
        z = rng.standard_normal((2, 2))
        g = random_spd(rng, 2)
        w = sym_sqrt(g, method="eigen")
        # dense sweep of directions maximizing |Zv|_g / |v|_g
        angles = np.linspace(0.0, np.pi, 200_001)
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        num = np.einsum("mi,ij,mj->m", dirs @ z.T, g, dirs @ z.T)
        den = np.einsum("mi,ij,mj->m", dirs, g, dirs)
        sampled = float(np.sqrt(np.max(num / den)))
        assert operator_norm(z, g) == pytest.approx(sampled, abs=1e-3)

    def test_submultiplicative(self):
        rng = np.random.default_rng(6)
        g = random_spd(rng, 3)
        for _ in range(20):
            a = rng.standard_normal((3, 3))
            b = rng.standard_normal((3, 3))
            assert operator_norm(a @ b, g) <= operator_norm(a, g) * operator_norm(b, g) + 1e-10


class TestSymSqrt:
    def test_identity(self):
        assert np.allclose(sym_sqrt(np.eye(3), method="power_series"), np.eye(3))

    def test_diagonal_frozen(self):
        # eigendecomposition oracle: sqrt of diag(1.21, 0.81) is diag(1.1, 0.9)
        w = sym_sqrt(np.diag([1.21, 0.81]), method="power_series", tol=1e-14)
        assert np.allclose(w, np.diag([1.1, 0.9]), atol=1e-13)

    def test_cross_method_at_radius_half(self):
        rng = np.random.default_rng(7)
        q = random_rotation(rng, 3)
        z = q @ np.diag([1.5, 0.8, 1.2]) @ q.T  # operator norm of Z - I is 0.5
        ws = sym_sqrt(z, method="power_series", tol=1e-13)
        we = sym_sqrt(z, method="eigen")
        assert frobenius(ws - we) < 1e-10

    def test_domain_error_outside_unit_ball(self):
        with pytest.raises(DomainError):
            sym_sqrt(np.diag([2.5, 0.5]), method="power_series")

    def test_eigen_works_outside_unit_ball(self):
        w = sym_sqrt(np.diag([4.0, 9.0]), method="eigen")
        assert np.allclose(w, np.diag([2.0, 3.0]))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.05, 0.95))
    def test_methods_agree_inside_unit_ball(self, seed, radius):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(2, 5))
        q = random_rotation(rng, dim)
        eigs = 1.0 + radius * (2.0 * rng.random(dim) - 1.0)
        z = q @ np.diag(eigs) @ q.T
        tol = 1e-12
        ws = sym_sqrt(z, method="power_series", tol=tol)
        we = sym_sqrt(z, method="eigen")
        assert frobenius(ws - we) < 10 * max(tol, 1e-11)
        assert frobenius(ws @ ws - z) < 1e-9


class TestSoResidual:
    def test_identity(self):
        assert so_residual(np.eye(3)) == 0.0

    def test_planar_rotation(self):
        assert so_residual(rotation2(0.7)) < 1e-14

    def test_diagonal_stretch_oracle(self):
        a = np.diag([2.0, 0.5])
        direct = frobenius(a.T @ a - np.eye(2))  # det contribution vanishes
        assert so_residual(a) == pytest.approx(direct, abs=1e-14)

    def test_form_aware(self):
        rng = np.random.default_rng(8)
        form = random_spd(rng, 3)
        frame = SqrtFrame.from_form(form, method="eigen")
        a = frame.embed(random_rotation(rng, 3))
        assert so_residual(a, form) < 1e-12
        assert so_residual(a) > 1e-3  # generally not a standard rotation


class TestSqrtFrame:
    def test_identity_form_is_transparent(self):
        rng = np.random.default_rng(9)
        a = random_rotation(rng, 3)
        frame = SqrtFrame.from_form(np.eye(3))
        assert np.allclose(frame.embed(a), a)

    def test_embedded_rotations_preserve_form(self):
        rng = np.random.default_rng(10)
        form = np.eye(4) + 0.3 * random_spd(rng, 4, spread=0.0) / 4.0
        frame = SqrtFrame.from_form(form)
        for _ in range(10):
            a = random_rotation(rng, 4)
            assert so_residual(frame.embed(a), form) < 1e-10

    def test_round_trip(self):
        rng = np.random.default_rng(11)
        form = random_spd(rng, 3)
        frame = SqrtFrame.from_form(form, method="eigen")
        a = random_rotation(rng, 3)
        assert frobenius(frame.unembed(frame.embed(a)) - a) < 1e-12

    def test_embedding_residual_scales_with_input_defect(self):
        # near-rotations stay near the embedded group, with a modest constant
        rng = np.random.default_rng(12)
        form = np.eye(3) + 0.2 * random_spd(rng, 3, spread=0.0) / 3.0
        frame = SqrtFrame.from_form(form)
        constant = 0.0
        for scale in (1e-8, 1e-7, 1e-6):
            a = random_rotation(rng, 3) + scale * rng.standard_normal((3, 3))
            eps = so_residual(a)
            res = so_residual(frame.embed(a, check=False), form)
            constant = max(constant, res / eps)
        assert constant < 10.0


class TestPrincipalLog:
    def test_identity(self):
        assert frobenius(principal_log(np.eye(3))) == 0.0

    def test_rotation_closed_form(self):
        log = principal_log(rotation2(0.3))
        assert np.allclose(log, np.array([[0.0, -0.3], [0.3, 0.0]]), atol=1e-12)

    def test_round_trip_against_series_exp(self):
        rng = np.random.default_rng(13)
        s = random_skew(rng, 4, scale=0.2)
        assert frobenius(principal_log(series_exp(s)) - s) < 1e-10

    def test_domain_error(self):
        with pytest.raises(DomainError):
            principal_log(rotation2(2.5))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_log_inverts_exp_on_small_skews(self, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(2, 5))
        s = random_skew(rng, dim)
        norm = np.linalg.norm(s, 2)
        if norm > 0:
            s = s * (0.85 * rng.random() / norm)
        log = principal_log(series_exp(s))
        assert frobenius(log - s) < 1e-9
        assert frobenius(log + log.T) < 1e-9  # skew for rotation input
