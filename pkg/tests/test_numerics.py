import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covert_isac.errors import BracketError, Infeasible, SingularDenominator, ZeroMatrix
from covert_isac.numerics import (
    QcqpOneProblem,
    QcqpProjector,
    generalized_rayleigh_max,
    max_quadratic_on_ball,
    rank1_extract,
    scalar_root,
    solve_qcqp1,
)


def random_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


class TestScalarRoot:
    def test_linear(self):
        assert abs(scalar_root(lambda x: x - 2.0, 0.0, 4.0, tol=1e-12) - 2.0) < 1e-11

    def test_cap_equation_residual(self):
        f = lambda x: math.log(x) + 1.0 / x - 1.0 - 2e-6
        root = scalar_root(f, 1.0, 10.0, tol=1e-12)
        assert abs(f(root)) <= 1e-12

    def test_tolerance_scaling(self):
        f = lambda x: x**3 - 1.7
        r1 = scalar_root(f, 0.0, 4.0, tol=1e-6)
        r2 = scalar_root(f, 0.0, 4.0, tol=5e-7)
        assert abs(f(r2)) <= abs(f(r1)) + 1e-15

    def test_no_bracket(self):
        with pytest.raises(BracketError):
            scalar_root(lambda x: x + 5.0, 0.0, 1.0, tol=1e-9)


class TestRayleigh:
    def test_identity_denominator_rank_one(self, rng):
        u = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        xi = np.outer(u, u.conj())
        w = generalized_rayleigh_max(xi, np.eye(6, dtype=complex))
        alignment = abs(np.vdot(w, u / np.linalg.norm(u)))
        assert alignment > 1.0 - 1e-10

    def test_beats_random_probes(self, rng):
        n = 8
        xi = random_hermitian(rng, n)
        xi = xi @ xi.conj().T  # PSD
        lam = random_hermitian(rng, n)
        lam = lam @ lam.conj().T + np.eye(n)
        w = generalized_rayleigh_max(xi, lam)

        def quotient(v):
            return float(np.real(v.conj() @ xi @ v) / np.real(v.conj() @ lam @ v))

        best = quotient(w)
        probes = rng.standard_normal((10_000, n)) + 1j * rng.standard_normal((10_000, n))
        vals = np.real(np.einsum("ij,jk,ik->i", probes.conj(), xi, probes)) / np.real(
            np.einsum("ij,jk,ik->i", probes.conj(), lam, probes)
        )
        assert best >= vals.max() - 1e-10

    def test_scaling_invariance(self, rng):
        n = 5
        xi = random_hermitian(rng, n)
        xi = xi @ xi.conj().T
        lam = np.eye(n, dtype=complex)
        w1 = generalized_rayleigh_max(xi, lam)
        w2 = generalized_rayleigh_max(5.0 * xi, lam)
        assert abs(abs(np.vdot(w1, w2)) - 1.0) < 1e-10

    def test_unitary_congruence_invariance(self, rng):
        n = 5
        xi = random_hermitian(rng, n)
        xi = xi @ xi.conj().T
        lam = random_hermitian(rng, n)
        lam = lam @ lam.conj().T + np.eye(n)
        q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        w = generalized_rayleigh_max(xi, lam)
        w_rot = generalized_rayleigh_max(q @ xi @ q.conj().T, q @ lam @ q.conj().T)
        assert abs(abs(np.vdot(q @ w, w_rot)) - 1.0) < 1e-9

    def test_singular_denominator(self):
        with pytest.raises(SingularDenominator):
            generalized_rayleigh_max(np.eye(3, dtype=complex), np.zeros((3, 3), dtype=complex))


class TestRank1Extract:
    def test_pure_rank_one(self, rng):
        u = rng.standard_normal(7) + 1j * rng.standard_normal(7)
        v, ratio = rank1_extract(np.outer(u, u.conj()))
        assert ratio < 1e-12
        assert abs(abs(np.vdot(v, u)) - np.linalg.norm(u) * np.linalg.norm(v)) < 1e-9

    def test_reconstruction_error_bound(self, rng):
        n = 6
        f = random_hermitian(rng, n)
        f = f @ f.conj().T
        v, ratio = rank1_extract(f)
        lam2 = np.linalg.eigvalsh(f)[-2]
        err = np.linalg.norm(f - np.outer(v, v.conj()))
        assert err <= lam2 * n + 1e-9

    def test_zero_matrix(self):
        with pytest.raises(ZeroMatrix):
            rank1_extract(np.zeros((4, 4), dtype=complex))


class TestQcqp:
    def test_inactive_constraint_returns_target(self, rng):
        q = random_hermitian(rng, 5)
        t = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        value = float(np.real(t.conj() @ q @ t))
        x = solve_qcqp1(QcqpOneProblem(t, q, value + 1.0))
        assert np.allclose(x, t)

    def test_unit_ball_projection(self):
        x = solve_qcqp1(QcqpOneProblem(np.array([2.0, 0.0 + 0j]), np.eye(2, dtype=complex), 1.0))
        assert np.allclose(x, [1.0, 0.0], atol=1e-9)

    def test_kkt_conditions_random(self, rng):
        for _ in range(40):
            n = 6
            q = random_hermitian(rng, n)
            t = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            c = float(rng.uniform(-2.0, 2.0))
            if np.linalg.eigvalsh(q)[0] >= 0 and c < 0:
                continue
            proj = QcqpProjector(q, c)
            x = proj.project(t)
            val = float(np.real(x.conj() @ q @ x))
            assert val <= c + 1e-8  # feasibility
            # stationarity: x = (I + mu Q)^-1 t for some mu >= 0
            resid = x - t
            if np.linalg.norm(resid) > 1e-10:
                qx = q @ x
                mu = -float(np.real(np.vdot(resid, qx))) / max(
                    float(np.real(np.vdot(qx, qx))), 1e-300
                )
                mu = max(mu, 0.0)
                assert np.linalg.norm(x + mu * qx - t) <= 1e-6 * max(np.linalg.norm(t), 1.0)
                assert abs(mu * (val - c)) <= 1e-6

    def test_hard_case_boundary_completion(self):
        q = np.diag([-1.0, 1.0]).astype(complex)
        t = np.array([0.0, 0.5 + 0j])
        x = solve_qcqp1(QcqpOneProblem(t, q, -1.0))
        val = float(np.real(x.conj() @ q @ x))
        assert abs(val - (-1.0)) < 1e-9
        assert abs(x[1] - 0.25) < 1e-12  # shrunk non-degenerate component

    def test_infeasible_psd_negative_bound(self):
        with pytest.raises(Infeasible):
            QcqpProjector(np.eye(3, dtype=complex), -1.0)

    def test_null_direction_pass_through(self, rng):
        q = np.diag([2.0, 0.0]).astype(complex)
        t = np.array([3.0 + 0j, 4.0 + 0j])
        x = solve_qcqp1(QcqpOneProblem(t, q, 1.0))
        assert abs(x[1] - 4.0) < 1e-9  # null component untouched
        assert abs(float(np.real(x.conj() @ q @ x)) - 1.0) < 1e-8

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_projection_feasible_property(self, seed):
        rng = np.random.default_rng(seed)
        n = 4
        q = random_hermitian(rng, n)
        t = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        c = float(rng.uniform(-1.0, 2.0))
        if np.linalg.eigvalsh(q)[0] >= 0 and c < 0:
            return
        x = solve_qcqp1(QcqpOneProblem(t, q, c))
        assert float(np.real(x.conj() @ q @ x)) <= c + 1e-7


class TestBallMax:
    def test_pure_linear(self):
        b = np.array([3.0, 4.0 + 0j])
        got = max_quadratic_on_ball(np.zeros((2, 2), dtype=complex), b, radius=2.0)
        assert abs(got - 2.0 * 2 * 5.0) < 1e-9  # 2 * r * ||b||

    def test_against_sampling(self, rng):
        n = 4
        a = random_hermitian(rng, n)
        b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        r = 1.3
        exact = max_quadratic_on_ball(a, b, r)
        z = rng.standard_normal((200_000, n)) + 1j * rng.standard_normal((200_000, n))
        z = r * z / np.linalg.norm(z, axis=1, keepdims=True)
        vals = np.real(np.einsum("ij,jk,ik->i", z.conj(), a, z)) + 2 * np.real(z @ b.conj())
        assert exact >= vals.max() - 1e-9
        assert exact <= vals.max() * 1.05 + 0.2  # sampling comes close on the sphere

    def test_negative_definite_interior(self):
        a = -np.eye(3, dtype=complex)
        b = np.array([0.1, 0.0, 0.0 + 0j])
        got = max_quadratic_on_ball(a, b, radius=5.0)
        # interior max at x = 0.1 e1: value = -0.01 + 2*0.01 = 0.01
        assert abs(got - 0.01) < 1e-10
