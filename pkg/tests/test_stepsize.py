import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abcfb.errors import ParameterError, StepsizeRuleError
from abcfb.problem import LipschitzData
from abcfb.stepsize import (BlockProbabilities, check_rule, compute_delta, delay_factor,
                            manual_stepsizes, max_stepsizes, rate_constants)


def uniform(m):
    return BlockProbabilities.uniform(m)


class TestBlockProbabilities:
    def test_sum_to_one(self):
        with pytest.raises(ParameterError):
            BlockProbabilities(np.array([0.5, 0.4]))

    def test_positive(self):
        with pytest.raises(ParameterError):
            BlockProbabilities(np.array([1.0, 0.0]))

    def test_delay_factor_uniform(self):
        assert delay_factor(uniform(4)) == pytest.approx(0.5, rel=1e-15)


class TestComputeDelta:
    def test_no_delay_unit_steps(self):
        L = LipschitzData([1.0, 2.0, 4.0], 4.0)
        gamma = manual_stepsizes(1.0 / L.per_block)
        assert compute_delta(gamma, L, uniform(3), 0) == 1.0

    def test_hand_value(self):
        L = LipschitzData(np.ones(4), 2.0)
        delta = compute_delta(manual_stepsizes(np.full(4, 0.1)), L, uniform(4), 1)
        assert delta == pytest.approx(0.3, rel=1e-14)

    def test_monotone_in_tau(self, rng):
        L = LipschitzData(rng.uniform(0.5, 2, 8), 3.0)
        p = BlockProbabilities.from_weights(rng.uniform(0.1, 1, 8))
        gamma = manual_stepsizes(rng.uniform(0.01, 0.1, 8))
        deltas = [compute_delta(gamma, L, p, tau) for tau in range(30)]
        assert all(a <= b for a, b in zip(deltas, deltas[1:]))

    def test_rejects_negative_tau(self):
        L = LipschitzData([1.0], 1.0)
        with pytest.raises(ParameterError):
            compute_delta(manual_stepsizes([0.5]), L, uniform(1), -1)


class TestMaxStepsizes:
    def test_classical_rule_at_zero_delay(self):
        L = LipschitzData([1.0, 2.0, 5.0], 6.0)
        for rule in ("theorem", "sublevel"):
            gamma = max_stepsizes(rule, L, uniform(3), 0, safety=0.9).gamma
            np.testing.assert_array_equal(gamma, 0.9 * 2.0 / L.per_block)

    def test_uniform_reduction(self):
        m, tau = 16, 3
        L = LipschitzData(np.linspace(1, 2, m), 4.0)
        gamma = max_stepsizes("theorem", L, uniform(m), tau).gamma
        np.testing.assert_allclose(gamma, 0.99 * 2 / (L.per_block + 2 * tau * 4.0 / math.sqrt(m)),
                                   rtol=4e-16)

    def test_hand_value(self):
        L = LipschitzData([2.0], 2.0)
        gamma = max_stepsizes("theorem", L, uniform(1), 1, safety=0.5).gamma
        assert gamma[0] == pytest.approx(1.0 / 6.0, rel=1e-15)

    @pytest.mark.parametrize("safety", [0.0, 1.0, 1.5, -0.1])
    def test_safety_range(self, safety):
        with pytest.raises(ParameterError):
            max_stepsizes("theorem", LipschitzData([1.0], 1.0), uniform(1), 0, safety)

    def test_rule_invariants_hold_strictly(self, rng):
        L = LipschitzData(rng.uniform(0.5, 2, 10), 5.0)
        p = BlockProbabilities.from_weights(rng.uniform(0.1, 1, 10))
        th = max_stepsizes("theorem", L, p, 7)
        sb = max_stepsizes("sublevel", L, p, 7)
        assert check_rule("theorem", th, L, p, 7)
        assert check_rule("sublevel", sb, L, p, 7)
        assert np.all(th.gamma * (L.per_block + 2 * 7 * 5.0 * delay_factor(p)) < 2)
        assert np.all(sb.gamma < 2 / (L.per_block + 2 * 7 * 5.0))

    def test_sublevel_vs_theorem_regimes(self):
        L = LipschitzData(np.ones(4), 2.0)
        # uniform over 4 blocks: p_max / sqrt(p_min) = 0.5 <= 1
        p_small = uniform(4)
        assert np.all(max_stepsizes("sublevel", L, p_small, 3).gamma
                      <= max_stepsizes("theorem", L, p_small, 3).gamma)
        # skewed: p_max / sqrt(p_min) > 1
        p_big = BlockProbabilities(np.array([0.97, 0.01, 0.01, 0.01]))
        assert delay_factor(p_big) > 1
        assert np.all(max_stepsizes("sublevel", L, p_big, 3).gamma
                      > max_stepsizes("theorem", L, p_big, 3).gamma)

    @settings(max_examples=300, deadline=None)
    @given(m=st.integers(1, 64), tau=st.integers(0, 50), seed=st.integers(0, 2**31),
           safety=st.floats(0.01, 0.999))
    def test_delta_below_two(self, m, tau, seed, safety):
        rng = np.random.default_rng(seed)
        per = rng.uniform(0.01, 10, m)
        L = LipschitzData(per, per.max() * rng.uniform(1, 10))
        p = BlockProbabilities.from_weights(rng.uniform(0.01, 1, m))
        assert compute_delta(max_stepsizes("theorem", L, p, tau, safety), L, p, tau) < 2


class TestRateConstants:
    def test_theta_zero_without_delay(self):
        L = LipschitzData([1.0, 1.0], 1.0)
        g = max_stepsizes("theorem", L, uniform(2), 0)
        c = rate_constants(compute_delta(g, L, uniform(2), 0), uniform(2), 0, L, g, 1.0)
        assert c.theta == 0.0

    def test_kappa_hand_value(self):
        L = LipschitzData([1.0], 1.0)
        c = rate_constants(1.0, uniform(1), 0, L, manual_stepsizes([1.0]), 0.5)
        assert c.kappa == 1.0

    def test_linear_factor_hand_value(self):
        L = LipschitzData(np.ones(4), 1.0)
        c = rate_constants(1.0, uniform(4), 0, L, manual_stepsizes(np.ones(4)), 0.5)
        assert (c.kappa, c.theta) == (1.0, 0.0)
        assert c.linear_factor == pytest.approx(0.75, rel=1e-15)

    def test_C_bound_formula(self):
        L = LipschitzData(np.ones(4), 2.0)
        p = uniform(4)
        g = manual_stepsizes(np.full(4, 0.1))
        delta = compute_delta(g, L, p, 1)
        c = rate_constants(delta, p, 1, L, g)
        expect = (max(1, 1 / (2 - delta)) / 0.25 - 1
                  + 1 / (0.5 * (2 - delta)) * (1 + 0.5))
        assert c.C_bound == pytest.approx(expect, rel=1e-14)

    def test_absent_without_eb_constant(self):
        L = LipschitzData([1.0], 1.0)
        c = rate_constants(1.0, uniform(1), 0, L, manual_stepsizes([1.0]))
        assert c.kappa is None and c.theta is None and c.linear_factor is None

    def test_rule_violation(self):
        L = LipschitzData([1.0], 1.0)
        with pytest.raises(StepsizeRuleError, match="stepsize rule violated"):
            rate_constants(2.0, uniform(1), 0, L, manual_stepsizes([2.0]))

    @settings(max_examples=200, deadline=None)
    @given(m=st.integers(1, 32), tau=st.integers(0, 20), seed=st.integers(0, 2**31),
           eb=st.floats(1e-3, 1e3))
    def test_linear_factor_in_unit_interval(self, m, tau, seed, eb):
        rng = np.random.default_rng(seed)
        per = rng.uniform(0.1, 3, m)
        L = LipschitzData(per, per.max() * 2)
        p = BlockProbabilities.from_weights(rng.uniform(0.05, 1, m))
        g = max_stepsizes("theorem", L, p, tau)
        c = rate_constants(compute_delta(g, L, p, tau), p, tau, L, g, eb)
        assert 0 <= c.linear_factor < 1
        # zero only in the degenerate case p_min = kappa + theta (m = 1, tau = 0, kappa = 1)
        if p.p_min < c.kappa + c.theta:
            assert c.linear_factor > 0

    def test_linear_factor_degenerate_single_block(self):
        L = LipschitzData([1.0], 1.0)
        c = rate_constants(1.0, uniform(1), 0, L, manual_stepsizes([1.0]), 0.25)
        assert c.linear_factor == 0.0
