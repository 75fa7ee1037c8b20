import math
import warnings

import numpy as np
import pytest

import oracles
from abcfb.applications import make_lasso, make_ridge_dual
from abcfb.diagnostics import (RateReport, alpha_k, alpha_tilde_k, alpha_tilde_series,
                               check_sublinear, estimate_F_star, fit_iterate_rate,
                               fit_linear_rate, format_report, lyapunov_violations,
                               parse_report, residual_lipschitz_V, triangular_weights, w_dist_sq)
from abcfb.errors import ContractError, OracleFailure
from abcfb.problem import BlockLayout, CompositeProblem, L1Norm
from abcfb.simulator import SolverConfig, run_sim
from abcfb.stepsize import BlockProbabilities, compute_delta, manual_stepsizes, rate_constants
from abcfb.trace import Trace, TraceRecord


def trace_of(F, ks=None, lyap=None):
    ks = range(len(F)) if ks is None else ks
    lyap = [None] * len(F) if lyap is None else lyap
    return Trace([TraceRecord(k=int(k), F=float(f), lyapunov=lv) for k, f, lv in zip(ks, F, lyap)])


class TestAlpha:
    def test_no_delay(self):
        assert alpha_k([], 0, 3.0, 0.5) == 0.0
        assert alpha_tilde_k([], 0, 3.0) == 0.0

    def test_converged(self):
        assert alpha_k([0.0, 0.0, 0.0], 3, 5.0, 0.2) == 0.0

    def test_hand_value(self):
        # scale L_res_V / (2 sqrt(p_max)) = 1 with p_max = 1
        assert alpha_k([1.0, 1.0], 2, 2.0, 1.0) == 3.0

    def test_tilde_hand_value(self):
        assert alpha_tilde_k([1.0, 1.0, 1.0], 3, 2.0) == 6.0

    def test_coincide_for_single_block(self):
        steps = [0.3, 0.1, 0.7, 0.2]
        L_V = residual_lipschitz_V(2.5, 1.0, 1.0)
        assert alpha_k(steps, 4, L_V, 1.0) == alpha_tilde_k(steps, 4, 2.5)

    def test_zero_padding(self):
        assert alpha_tilde_k([5.0], 3, 2.0) == 3.0 * 5.0

    def test_weights(self):
        assert triangular_weights(4).tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_series_matches_scratch(self, rng):
        for tau in (0, 1, 3, 7):
            s = rng.uniform(0, 1, 60)
            series = alpha_tilde_series(s, tau, 1.7)
            for k in range(61):
                scratch = oracles.triangular_alpha(s, k, tau, 0.85)
                assert series[k] == pytest.approx(scratch, rel=1e-12, abs=1e-15)
                assert alpha_tilde_k(s[max(0, k - tau):k], tau, 1.7) == pytest.approx(scratch,
                                                                                     rel=1e-14)

    def test_series_matches_sum_integers_exactly(self):
        s = np.arange(1.0, 30.0)
        series = alpha_tilde_series(s, 5, 2.0)
        for k in range(30):
            assert series[k] == oracles.triangular_alpha(s, k, 5, 1.0)


class TestMonotone:
    def test_counts_strict_increases(self):
        tr = trace_of([3, 2, 2, 2], lyap=[3.0, 2.0, 2.5, 2.4])
        assert lyapunov_violations(tr) == 1

    def test_tolerance(self):
        tr = trace_of([1, 1], lyap=[1.0, 1.0 + 1e-11])
        assert lyapunov_violations(tr) == 0


class TestSublinear:
    def test_converged_trace(self):
        chk = check_sublinear(trace_of([1.0] * 20), 1.0, 2.0, 1.0)
        assert chk.violations == 0

    def test_missing_F_star(self):
        with pytest.raises(ContractError):
            check_sublinear(trace_of([1.0, 0.5]), None, 1.0, 1.0)

    def test_detects_violation(self):
        chk = check_sublinear(trace_of([1.0, 1.0, 1.0]), 0.0, 0.0, 0.1)
        assert chk.violations == 2 and chk.margin < 0

    def test_classical_quadratic(self):
        Q = np.array([[2.0, 0.3], [0.3, 1.0]])
        prob = CompositeProblem.quadratic(BlockLayout((2,)), Q, [1.0, 1.0], L1Norm(0.2))
        L = float(np.linalg.eigvalsh(Q).max())
        gamma = manual_stepsizes([1.0 / L])
        p = BlockProbabilities.uniform(1)
        cfg = SolverConfig(p, gamma, max_iters=300, trace_every=1)
        res = run_sim(prob, cfg)
        ref = estimate_F_star(prob)
        delta = compute_delta(gamma, prob.lipschitz, p, 0)
        C = rate_constants(delta, p, 0, prob.lipschitz, gamma).C_bound
        chk = check_sublinear(res.trace, ref.value, C, w_dist_sq(prob, np.zeros(2), ref.x,
                                                                 gamma.gamma, p))
        assert chk.violations == 0 and chk.checked == len(res.trace) - 1 > 10

    def test_replication_grid(self):
        with pytest.raises(ContractError):
            check_sublinear([trace_of([1, 0.5]), trace_of([1, 0.5], ks=[0, 2])], 0.0, 1.0, 1.0)


class TestLinearFit:
    def test_geometric(self):
        F = [0.5 ** k for k in range(40)]
        assert fit_linear_rate(trace_of(F), 0.0, 0) == pytest.approx(0.5, abs=1e-9)

    def test_epochs(self):
        k = np.arange(0, 120)
        F = 0.8 ** (k // 4)
        assert fit_linear_rate(trace_of(F, ks=k), 0.0, 3) == pytest.approx(0.8, abs=1e-9)

    def test_nonpositive_gaps_skip(self):
        with pytest.warns(RuntimeWarning, match="skipped"):
            assert math.isnan(fit_linear_rate(trace_of([1.0, 1.0, 1.0]), 1.0, 0))

    def test_strongly_convex_quadratic(self):
        Q = np.array([[3.0, 0.5], [0.5, 1.0]])
        prob = CompositeProblem.quadratic(BlockLayout((2,)), Q, [1.0, -1.0])
        L = float(np.linalg.eigvalsh(Q).max())
        cfg = SolverConfig(BlockProbabilities.uniform(1), manual_stepsizes([1.0 / L]),
                           max_iters=60, trace_every=1)
        res = run_sim(prob, cfg)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            rho = fit_linear_rate(res.trace, estimate_F_star(prob).value, 0)
        assert rho < 1

    def test_iterate_rate(self):
        k = np.arange(50)
        assert fit_iterate_rate(k, 0.9 ** (k / 2), 0) == pytest.approx(0.9, rel=1e-9)


class TestFStar:
    def test_ridge_hand_value(self):
        prob, _ = make_ridge_dual([[1.0]], [2.0], 1.0)
        ref = estimate_F_star(prob)
        assert ref.value == -1.0 and ref.x.tolist() == [1.0]
        assert ref.provenance.startswith("closed_form")

    def test_lasso_above_lambda_max(self, rng):
        A = rng.standard_normal((10, 6))
        b = rng.standard_normal(10)
        lam = 1.01 * float(np.max(np.abs(A.T @ b)))
        ref = estimate_F_star(make_lasso(A, b, lam))
        assert ref.value == pytest.approx(0.5 * float(b @ b), rel=1e-14)
        assert not ref.x.any()

    def test_normal_equations(self, rng):
        M = rng.standard_normal((5, 5))
        Q = M @ M.T + np.eye(5)
        c = rng.standard_normal(5)
        ref = estimate_F_star(CompositeProblem.quadratic(BlockLayout.scalar(5), Q, c))
        assert ref.value == pytest.approx(-0.5 * c @ np.linalg.solve(Q, c), rel=1e-12)

    def test_lasso_cvxpy_frozen(self, desk_lasso, frozen):
        ref = estimate_F_star(desk_lasso)
        assert ref.value == pytest.approx(frozen["lasso_seed0"]["F_star_cvxpy"], rel=1e-9)
        inst = desk_lasso.instance
        assert oracles.lasso_kkt_violation(inst.A, inst.b, inst.lam, ref.x) < 1e-9
        assert np.flatnonzero(ref.x).tolist() == frozen["lasso_seed0"]["support"]

    def test_unreachable_tolerance(self, desk_lasso):
        with pytest.raises(OracleFailure):
            estimate_F_star(desk_lasso, tol=1e-12, max_iter=20)


class TestReport:
    def test_round_trip(self):
        rep = RateReport(12.5, 0.97, None, 0, 0, 0.25, True, 50)
        parsed = parse_report(format_report(rep))
        assert parsed["fitted_rho"] == "0.97" and parsed["theory_rho"] == ""
        assert parsed["decile_trend"] == "true" and float(parsed["sublinear_constant"]) == 12.5


class TestLyapunovSensitivity:
    def test_detects_increase_beyond_sublevel_rule(self, desk_lasso):
        # the theorem rule allows larger steps than the sublevel rule for uniform p over
        # many blocks; there the per-realization descent is no longer guaranteed
        cfg = SolverConfig.for_problem(desk_lasso, tau=10, rule="theorem", max_iters=600,
                                       trace_every=1, seed=1)
        assert lyapunov_violations(run_sim(desk_lasso, cfg).trace) > 0
