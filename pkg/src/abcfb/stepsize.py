"""Admissible stepsizes and the constants of the convergence bounds.

Two rules are supported:

``theorem``
    ``gamma_i (L_i + 2 tau L_res p_max / sqrt(p_min)) < 2``; guarantees the
    expected sublinear and linear rates.
``sublevel``
    ``gamma_i < 2 / (L_i + 2 tau L_res)``; additionally makes
    ``F(x^k) + alpha~_k`` decrease along every realization, so the iterates
    stay in the initial sublevel set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError, StepsizeRuleError, StructuralError
from .problem import LipschitzData

__all__ = [
    "BlockProbabilities",
    "StepsizeSchedule",
    "RateConstants",
    "RULES",
    "delay_factor",
    "compute_delta",
    "max_stepsizes",
    "manual_stepsizes",
    "check_rule",
    "rate_constants",
]

RULES = ("theorem", "sublevel", "manual")

DEFAULT_SAFETY = 0.99


@dataclass(frozen=True)
class BlockProbabilities:
    """Selection probabilities ``p_i`` of the blocks."""

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float).reshape(-1)
        if p.size == 0:
            raise StructuralError("need at least one block probability")
        if np.any(p <= 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
            raise ParameterError("block probabilities must lie in (0, 1]")
        if abs(math.fsum(p) - 1.0) > 1e-12:
            raise ParameterError(f"block probabilities sum to {math.fsum(p)!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, m: int) -> "BlockProbabilities":
        return cls(np.full(int(m), 1.0 / int(m)))

    @classmethod
    def from_weights(cls, weights) -> "BlockProbabilities":
        w = np.asarray(weights, dtype=float)
        return cls(w / math.fsum(w))

    @property
    def m(self) -> int:
        return self.p.size

    @property
    def p_min(self) -> float:
        return float(self.p.min())

    @property
    def p_max(self) -> float:
        return float(self.p.max())


@dataclass(frozen=True)
class StepsizeSchedule:
    gamma: np.ndarray
    rule: str = "manual"
    safety: Optional[float] = None

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float).reshape(-1)
        if g.size == 0 or np.any(g <= 0) or not np.all(np.isfinite(g)):
            raise ParameterError("stepsizes must be positive and finite")
        if self.rule not in RULES:
            raise ParameterError(f"unknown stepsize rule {self.rule!r}")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    @property
    def m(self) -> int:
        return self.gamma.size

    @property
    def gamma_max(self) -> float:
        return float(self.gamma.max())


@dataclass(frozen=True)
class RateConstants:
    """Constants of the sublinear bound and, when available, the linear rate.

    ``C_bound`` is the right-hand side of the inequality bounding ``C``; it is
    an upper estimate, never claimed tight.  ``kappa``, ``theta`` and
    ``linear_factor`` are ``None`` unless an error-bound constant is given.
    """

    delta: float
    C_bound: float
    kappa: Optional[float] = None
    theta: Optional[float] = None
    linear_factor: Optional[float] = None
    eb_constant: Optional[float] = None


def delay_factor(p: BlockProbabilities) -> float:
    """``p_max / sqrt(p_min)``; equals ``1/sqrt(m)`` for uniform sampling."""
    return p.p_max / math.sqrt(p.p_min)


def _check_sizes(L: LipschitzData, p: BlockProbabilities, gamma=None):
    if L.m != p.m:
        raise StructuralError(f"{L.m} Lipschitz constants but {p.m} probabilities")
    if gamma is not None and gamma.m != p.m:
        raise StructuralError(f"{gamma.m} stepsizes but {p.m} probabilities")


def _check_tau(tau) -> int:
    if int(tau) != tau or tau < 0:
        raise ParameterError(f"delay bound tau must be a nonnegative integer, got {tau}")
    return int(tau)


def compute_delta(gamma: StepsizeSchedule, L: LipschitzData, p: BlockProbabilities,
                  tau: int) -> float:
    """``max_i gamma_i (L_i + 2 tau L_res p_max / sqrt(p_min))``."""
    tau = _check_tau(tau)
    _check_sizes(L, p, gamma)
    delay = 2.0 * tau * L.residual * delay_factor(p)
    return float(np.max(L.per_block * gamma.gamma + delay * gamma.gamma))


def _denominators(rule: str, L: LipschitzData, p: BlockProbabilities, tau: int) -> np.ndarray:
    if rule == "theorem":
        return L.per_block + 2.0 * tau * L.residual * delay_factor(p)
    if rule == "sublevel":
        return L.per_block + 2.0 * tau * L.residual
    raise ParameterError(f"rule {rule!r} has no closed-form maximal stepsize")


def max_stepsizes(rule: str, L: LipschitzData, p: BlockProbabilities, tau: int,
                  safety: float = DEFAULT_SAFETY) -> StepsizeSchedule:
    """Largest stepsizes of a rule, backed off by ``safety`` in (0, 1)."""
    if not 0.0 < safety < 1.0:
        raise ParameterError(f"safety factor must lie in (0, 1), got {safety}")
    tau = _check_tau(tau)
    _check_sizes(L, p)
    gamma = safety * 2.0 / _denominators(rule, L, p, tau)
    return StepsizeSchedule(gamma, rule=rule, safety=safety)


def manual_stepsizes(gamma) -> StepsizeSchedule:
    return StepsizeSchedule(np.asarray(gamma, dtype=float), rule="manual")


def check_rule(rule: str, gamma: StepsizeSchedule, L: LipschitzData, p: BlockProbabilities,
               tau: int) -> bool:
    """Whether ``gamma`` satisfies ``rule`` strictly in every block."""
    tau = _check_tau(tau)
    _check_sizes(L, p, gamma)
    return bool(np.all(gamma.gamma * _denominators(rule, L, p, tau) < 2.0))


def rate_constants(delta: float, p: BlockProbabilities, tau: int, L: LipschitzData,
                   gamma: StepsizeSchedule, eb_constant: Optional[float] = None) -> RateConstants:
    """Constants of the ``O(1/k)`` bound and of the linear rate.

    Raises
    ------
    StepsizeRuleError
        If ``delta >= 2``; none of the guarantees apply then.
    """
    tau = _check_tau(tau)
    _check_sizes(L, p, gamma)
    if not delta < 2.0:
        raise StepsizeRuleError(f"stepsize rule violated: delta = {delta!r} >= 2")
    p_min, p_max = p.p_min, p.p_max
    gap = 2.0 - delta
    C_bound = (max(1.0, 1.0 / gap) / p_min - 1.0
               + tau / (math.sqrt(p_min) * gap) * (1.0 + p_max / math.sqrt(p_min)))
    if eb_constant is None:
        return RateConstants(delta=delta, C_bound=C_bound)
    if not eb_constant > 0:
        raise ParameterError(f"error-bound constant must be positive, got {eb_constant}")
    kappa = max(1.0, 2.0 * eb_constant / gap)
    theta = tau * L.residual * gamma.gamma_max / gap * (p_max ** 2 / math.sqrt(p_min) + 1.0)
    linear_factor = 1.0 - p_min / (kappa + theta)
    return RateConstants(delta=delta, C_bound=C_bound, kappa=kappa, theta=theta,
                         linear_factor=linear_factor, eb_constant=float(eb_constant))
