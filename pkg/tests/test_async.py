import numpy as np
import pytest

from abcfb.async_engine import (THREADS_ENV, StalenessStats, measure_staleness, resolve_workers,
                                run_async, run_async_ridge, torn_read_stress)
from abcfb.errors import EngineAbort, ParameterError, StepsizeRuleError
from abcfb.problem import BlockLayout, CompositeProblem, L1Norm
from abcfb.simulator import SolverConfig, run_sim
from abcfb.stepsize import BlockProbabilities, manual_stepsizes


class TestStalenessReport:
    def test_empty(self):
        rep = measure_staleness(StalenessStats.empty(), 3)
        assert rep.max == 0 and rep.total_updates == 0 and rep.assumption_held

    def test_summary(self):
        stats = StalenessStats(np.array([5, 3, 0, 2]), np.array([6, 4]))
        rep = measure_staleness(stats, 2)
        assert rep.max == 3 and not rep.assumption_held
        assert rep.mean == pytest.approx((3 + 6) / 10)
        assert rep.quantiles[0.5] == 0 and rep.quantiles[0.99] == 3


class TestWorkers:
    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "2")
        assert resolve_workers(8) == 2
        monkeypatch.setenv(THREADS_ENV, "zero")
        with pytest.raises(ParameterError):
            resolve_workers(8)

    def test_at_least_one(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        with pytest.raises(ParameterError):
            resolve_workers(0)


class TestRunAsync:
    def test_single_worker(self, desk_lasso):
        cfg = SolverConfig.for_problem(desk_lasso, tau=0, max_iters=3000, trace_every=500)
        res = run_async(desk_lasso, cfg, workers=1, assumed_tau=0)
        assert res.stats.max_observed == 0
        assert res.stats.total == 3000 and res.stats.per_worker.tolist() == [3000]
        assert measure_staleness(res.stats, 0).assumption_held
        assert res.tau_warning is None

    def test_single_block_matches_serial(self):
        Q = np.array([[2.0, 0.5], [0.5, 1.0]])
        prob = CompositeProblem.quadratic(BlockLayout((2,)), Q, [1.0, -1.0], L1Norm(0.1))
        cfg = SolverConfig(BlockProbabilities.uniform(1), manual_stepsizes([0.5]), seed=3,
                           max_iters=200)
        res = run_async(prob, cfg, workers=1, assumed_tau=0)
        serial = run_sim(prob, cfg)
        assert abs(res.trace.F[-1] - serial.trace.F[-1]) <= 1e-10
        np.testing.assert_array_equal(res.x, serial.x)

    @pytest.mark.parametrize("backend", ["process", "thread"])
    def test_four_workers_counter_exact(self, desk_lasso, backend):
        cfg = SolverConfig.for_problem(desk_lasso, tau=8, max_iters=20000, trace_every=2000)
        res = run_async(desk_lasso, cfg, workers=4, assumed_tau=8, backend=backend)
        assert res.stats.total == 20000 == int(res.stats.per_worker.sum())
        assert res.trace.k[-1] == 20000
        assert res.stats.max_observed >= 0

    def test_staleness_positive_under_contention(self, desk_lasso, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        cfg = SolverConfig.for_problem(desk_lasso, tau=64, rule="sublevel", max_iters=10**5,
                                       trace_every=10**4)
        res = run_async(desk_lasso, cfg, workers=4, assumed_tau=64)
        assert res.stats.max_observed > 0

    def test_residual_sanity(self, desk_lasso):
        cfg = SolverConfig.for_problem(desk_lasso, tau=40, rule="sublevel", max_iters=20000,
                                       trace_every=5000)
        serial = run_sim(desk_lasso, cfg).trace.records[-1].residual
        res = run_async(desk_lasso, cfg, workers=4, assumed_tau=40)
        assert res.trace.records[-1].residual <= 10 * serial

    def test_rule_guard(self, desk_lasso):
        cfg = SolverConfig(BlockProbabilities.uniform(100), manual_stepsizes(np.full(100, 3.0)))
        with pytest.raises(StepsizeRuleError, match="stepsize rule violated"):
            run_async(desk_lasso, cfg, workers=2, assumed_tau=0)

    @pytest.mark.parametrize("backend", ["process", "thread"])
    def test_worker_failure_aborts(self, backend):
        lay = BlockLayout.scalar(3)

        def broken(x, i):
            raise FloatingPointError("boom")

        good = CompositeProblem.quadratic(lay, np.eye(3))
        prob = CompositeProblem(lay, good.smooth_value, broken, good.nonsmooth, good.lipschitz,
                                gradient=good.gradient)
        cfg = SolverConfig(BlockProbabilities.uniform(3), manual_stepsizes([0.5] * 3),
                           max_iters=100)
        with pytest.raises(EngineAbort, match="boom"):
            run_async(prob, cfg, workers=2, assumed_tau=0, backend=backend, timeout=60)

    def test_ridge_kkt_and_objective(self, desk_ridge):
        prob, inst = desk_ridge
        cfg = SolverConfig.for_problem(prob, tau=8, max_iters=40000, trace_every=5000)
        res = run_async_ridge(prob, cfg, workers=4, assumed_tau=8)
        assert res.extra["kkt_gap"] <= 1e-12
        F_star = inst.optimal_value()
        assert abs(res.trace.F[-1] - F_star) <= 1e-8 * abs(F_star)


def test_no_torn_scalars():
    stats = torn_read_stress(dim=2048, writers=2, rounds=1000, reads=1000)
    assert stats["snapshots"] == 1000
    assert stats["torn"] == 0
