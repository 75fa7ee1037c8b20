import threading

import numpy as np
import pytest

import oracles
from abcfb.applications import (NORM_MARGIN, make_lasso, make_ridge_dual, random_lasso,
                                ridge_dual_step, run_ridge_tracking, soft_threshold)
from abcfb.errors import ParameterError
from abcfb.simulator import SolverConfig, run_sim


class TestSoftThreshold:
    def test_dead_zone(self):
        assert soft_threshold(0.5, 1.0) == 0.0

    def test_zero_threshold(self):
        assert soft_threshold(-3.25, 0.0) == -3.25

    def test_case(self):
        assert soft_threshold(-2.0, 0.5) == -1.5

    def test_matches_oracle(self, rng):
        v = rng.standard_normal(1000) * 3
        np.testing.assert_array_equal(soft_threshold(v, 0.7), oracles.soft(v, 0.7))

    def test_negative_threshold(self):
        with pytest.raises(ParameterError):
            soft_threshold(1.0, -0.1)


class TestLasso:
    def test_identity_gradient(self):
        prob = make_lasso(np.eye(2), [1.0, 0.0], 0.1)
        assert prob.full_gradient(np.zeros(2)).tolist() == [-1.0, 0.0]

    def test_identity_constants(self):
        prob = make_lasso(np.eye(2), [1.0, 0.0], 0.1)
        assert prob.lipschitz.per_block.tolist() == [1.0, 1.0]
        assert prob.lipschitz.residual == pytest.approx(1.0, rel=2 * NORM_MARGIN)

    def test_zero_column(self):
        with pytest.raises(ParameterError, match="zero column"):
            make_lasso(np.array([[1.0, 0.0], [2.0, 0.0]]), [1.0, 1.0], 0.1)

    def test_lambda_positive(self):
        with pytest.raises(ParameterError):
            make_lasso(np.eye(2), [1.0, 0.0], 0.0)

    def test_partial_matches_full(self, desk_lasso, rng):
        A, b = desk_lasso.instance.A, desk_lasso.instance.b
        for _ in range(10):
            x = rng.standard_normal(desk_lasso.dim)
            full = A.T @ (A @ x - b)
            got = np.array([desk_lasso.partial_gradient(x, i)[0] for i in range(desk_lasso.m)])
            np.testing.assert_allclose(got, full, rtol=0, atol=1e-12)

    def test_constants(self, desk_lasso, frozen):
        L = desk_lasso.lipschitz
        A = desk_lasso.instance.A
        np.testing.assert_allclose(L.per_block, (A ** 2).sum(axis=0), rtol=1e-15)
        assert L.residual >= L.L_max
        L_res = frozen["lasso_seed0"]["L_res"]
        assert L_res <= L.residual <= L_res * (1 + 2 * NORM_MARGIN)

    def test_large_lambda_gives_zero(self, rng):
        A = rng.standard_normal((20, 8))
        b = rng.standard_normal(20)
        prob = make_lasso(A, b, float(np.max(np.abs(A.T @ b))))
        res = run_sim(prob, SolverConfig.for_problem(prob, tau=2, max_iters=3000))
        assert not res.x.any()

    def test_planted_support_recovered(self):
        prob = random_lasso(n=80, m=40, sparsity=4, noise=0.0, lam_ratio=0.01, seed=3)
        from abcfb.diagnostics import estimate_F_star

        x = estimate_F_star(prob).x
        planted = prob.instance.x_planted
        assert set(np.flatnonzero(np.abs(x) > 1e-3)) == set(np.flatnonzero(planted))


class TestRidge:
    def test_hand_gradient(self):
        prob, _ = make_ridge_dual([[1.0]], [2.0], 1.0)
        assert prob.partial_gradient(np.zeros(1), 0).tolist() == [-2.0]
        assert prob.lipschitz.per_block.tolist() == [2.0]

    def test_stationary_at_solution(self, desk_ridge):
        prob, inst = desk_ridge
        u = inst.solve()
        assert np.max(np.abs(prob.full_gradient(u))) < 1e-12

    def test_closed_form(self, desk_ridge, frozen):
        prob, inst = desk_ridge
        H = inst.K + inst.reg * np.eye(inst.m)
        assert prob.lipschitz.residual == pytest.approx(np.linalg.norm(H, 2), rel=2 * NORM_MARGIN)
        assert inst.optimal_value() == pytest.approx(frozen["ridge_seed0"]["F_star"], rel=1e-14)

    def test_step_hand_trace(self):
        _, inst = make_ridge_dual([[1.0]], [2.0], 1.0)
        u1 = ridge_dual_step(inst, 0, 0.25, inst.w.copy(), inst.u[0])
        assert u1 == 0.5
        assert inst.u.tolist() == [0.5]
        # KKT link w = X^T u
        assert inst.w.tolist() == [0.5]

    def test_step_at_solution(self, desk_ridge):
        _, inst = desk_ridge
        inst.reset(inst.solve())
        u0, w0 = inst.u.copy(), inst.w.copy()
        for i in range(inst.m):
            ridge_dual_step(inst, i, 0.01, inst.w.copy(), inst.u[i])
        np.testing.assert_allclose(inst.u, u0, atol=1e-14)
        np.testing.assert_allclose(inst.w, w0, atol=1e-13)
        inst.reset()

    def test_step_with_lock(self):
        _, inst = make_ridge_dual([[1.0], [2.0]], [1.0, 1.0], 0.5)
        ridge_dual_step(inst, 1, 0.1, inst.w.copy(), inst.u[1], lock=threading.Lock())
        assert inst.kkt_gap() < 1e-15

    def test_tracking_keeps_kkt(self, desk_ridge):
        prob, inst = desk_ridge
        cfg = SolverConfig.for_problem(prob, tau=5, delay="uniform_iid", max_iters=3000, seed=4)
        res = run_ridge_tracking(prob, cfg)
        assert res.max_kkt_gap <= 1e-12
        np.testing.assert_allclose(res.u, run_sim(prob, cfg).x, rtol=0, atol=1e-12)

    def test_final_objective(self, desk_ridge):
        prob, inst = desk_ridge
        cfg = SolverConfig.for_problem(prob, tau=5, max_iters=20000, trace_every=500)
        F = run_sim(prob, cfg).trace.F[-1]
        assert abs(F - inst.optimal_value()) <= 1e-8 * abs(inst.optimal_value())
