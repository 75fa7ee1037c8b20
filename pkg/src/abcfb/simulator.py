"""Deterministic simulation of the delayed block-coordinate forward-backward method.

At iteration ``k`` a block ``i_k`` is drawn with probabilities ``p``, a delay
vector ``d^k`` with ``max_i d^k_i <= min(k, tau)`` is drawn from a separate
stream, and only block ``i_k`` moves::

    x^{k+1}_{i_k} = prox_{gamma_{i_k} g_{i_k}}(x^k_{i_k} - gamma_{i_k} grad_{i_k} f(x^{k - d^k}))

where block ``j`` of ``x^{k - d^k}`` is block ``j`` of ``x^{k - d^k_j}``.  The
last ``tau + 1`` iterates are kept in a ring buffer to serve these reads.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, ParameterError, StepsizeRuleError, StructuralError
from .problem import BlockLayout, CompositeProblem, _residual
from .sampling import DELAYS, SELECTION, AliasTable, UniformStream, make_streams
from .stepsize import (DEFAULT_SAFETY, BlockProbabilities, StepsizeSchedule, compute_delta,
                       max_stepsizes)
from .trace import Trace, TraceRecord

__all__ = [
    "DELAY_KINDS",
    "DelayModel",
    "SolverConfig",
    "IterateHistory",
    "StepRecord",
    "SimState",
    "SimResult",
    "gen_delay",
    "delayed_read",
    "sim_step",
    "run_sim",
    "verify_decomposition",
    "candidate_blocks",
    "metric_identity_sides",
]

DELAY_KINDS = ("zero", "constant", "uniform_iid", "per_block_uniform_iid", "adversarial_max")


@dataclass(frozen=True)
class DelayModel:
    """Bounded delay process.

    ``zero``
        no delay.
    ``constant``
        ``d^k_i = min(k, c)`` on every block.
    ``uniform_iid``
        one ``d ~ U{0..min(k, tau)}`` shared by all blocks (a consistent read
        of a past iterate).
    ``per_block_uniform_iid``
        independent ``d_i ~ U{0..min(k, tau)}`` per block (inconsistent read).
    ``adversarial_max``
        ``d^k_i = min(k, tau)`` on every block.
    """

    kind: str = "zero"
    tau: int = 0
    c: int = 0

    def __post_init__(self):
        if self.kind not in DELAY_KINDS:
            raise ParameterError(f"unknown delay model {self.kind!r}; choose from {DELAY_KINDS}")
        if int(self.tau) != self.tau or self.tau < 0:
            raise ParameterError(f"tau must be a nonnegative integer, got {self.tau}")
        if self.kind == "constant" and not 0 <= self.c <= self.tau:
            raise ParameterError(f"constant delay {self.c} must lie in [0, tau={self.tau}]")
        object.__setattr__(self, "tau", int(self.tau))
        object.__setattr__(self, "c", int(self.c))

    @classmethod
    def constant_delay(cls, c: int, tau: Optional[int] = None) -> "DelayModel":
        return cls("constant", c if tau is None else tau, c)

    def bound(self, k: int) -> int:
        return min(k, self.tau)

    def generate(self, k: int, m: int, rng: np.random.Generator) -> np.ndarray:
        hi = min(k, self.tau)
        if self.kind == "zero" or hi == 0:
            return np.zeros(m, dtype=np.int64)
        if self.kind == "constant":
            return np.full(m, min(k, self.c), dtype=np.int64)
        if self.kind == "adversarial_max":
            return np.full(m, hi, dtype=np.int64)
        if self.kind == "uniform_iid":
            return np.full(m, rng.integers(0, hi + 1), dtype=np.int64)
        return rng.integers(0, hi + 1, size=m, dtype=np.int64)


def gen_delay(model: DelayModel, k: int, rng: np.random.Generator, m: int) -> np.ndarray:
    """Delay vector ``d^k`` of length ``m``, bounded by ``min(k, tau)``."""
    return model.generate(k, m, rng)


@dataclass(frozen=True)
class SolverConfig:
    probabilities: BlockProbabilities
    stepsizes: StepsizeSchedule
    delay: DelayModel = field(default_factory=DelayModel)
    seed: int = 0
    max_iters: int = 1000
    residual_tol: float = 0.0
    trace_every: int = 10

    def __post_init__(self):
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.residual_tol >= 0:
            raise ParameterError(f"residual_tol must be >= 0, got {self.residual_tol}")
        if self.trace_every < 1:
            raise ParameterError(f"trace_every must be >= 1, got {self.trace_every}")
        if self.probabilities.m != self.stepsizes.m:
            raise StructuralError("probabilities and stepsizes disagree on the number of blocks")

    @property
    def tau(self) -> int:
        return self.delay.tau

    @classmethod
    def for_problem(cls, problem: CompositeProblem, tau: int = 0, rule: str = "theorem",
                    delay: str = "per_block_uniform_iid", safety: float = DEFAULT_SAFETY,
                    probabilities: Optional[BlockProbabilities] = None, **kwargs) -> "SolverConfig":
        """Config with the maximal stepsizes of ``rule`` for ``problem``."""
        p = probabilities or BlockProbabilities.uniform(problem.m)
        gamma = max_stepsizes(rule, problem.lipschitz, p, tau, safety)
        model = DelayModel(delay if tau > 0 else "zero", tau)
        return cls(probabilities=p, stepsizes=gamma, delay=model, **kwargs)


class IterateHistory:
    """Ring buffer holding ``x^{k - tau}, ..., x^k``.

    Indices below zero resolve to ``x^0``.
    """

    def __init__(self, layout: BlockLayout, tau: int, x0: np.ndarray):
        self.layout = layout
        self.tau = int(tau)
        self.capacity = self.tau + 1
        self.ring = np.empty((self.capacity, layout.dim))
        self.ring[0] = x0
        self.newest = 0
        self._cols = np.arange(layout.dim)

    @property
    def oldest(self) -> int:
        return max(0, self.newest - self.tau)

    def get(self, j: int) -> np.ndarray:
        """Snapshot ``x^j`` (read-only view)."""
        if j > self.newest or j < self.newest - self.tau:
            raise ContractError(
                f"iterate {j} not retained (have {self.newest - self.tau}..{self.newest})")
        view = self.ring[max(j, 0) % self.capacity]
        view = view.view()
        view.setflags(write=False)
        return view

    @property
    def current(self) -> np.ndarray:
        return self.ring[self.newest % self.capacity]

    def advance(self, i: int, new_block: np.ndarray) -> None:
        """Append ``x^{k+1}``: a copy of ``x^k`` with block ``i`` replaced."""
        k = self.newest
        cur = self.ring[k % self.capacity]
        nxt = self.ring[(k + 1) % self.capacity]
        if self.capacity > 1:
            nxt[:] = cur
        nxt[self.layout.slice(i)] = new_block
        self.newest = k + 1

    def read(self, d: np.ndarray) -> np.ndarray:
        """Inconsistent read at the newest iteration, without checks."""
        k = self.newest
        if not d.any():
            return self.ring[k % self.capacity].copy()
        dc = d if self.layout.is_scalar else d[self.layout.coord_block]
        return self.ring[(k - dc) % self.capacity, self._cols]


def delayed_read(history: IterateHistory, k: int, d) -> np.ndarray:
    """``x^{k - d}``: block ``i`` taken from snapshot ``x^{k - d_i}``."""
    d = np.asarray(d, dtype=np.int64)
    if d.shape != (history.layout.m,):
        raise StructuralError(f"delay vector must have {history.layout.m} entries")
    if k != history.newest:
        raise ContractError(f"history is at iteration {history.newest}, read requested at {k}")
    if np.any(d < 0) or np.any(d > min(k, history.tau)):
        raise ContractError(f"delays {d.tolist()} exceed min(k, tau) = {min(k, history.tau)}")
    return history.read(d)


@dataclass
class StepRecord:
    k: int
    block: int
    delay: np.ndarray
    step_norm_sq: float
    decomposition_ok: Optional[bool] = None


@dataclass
class SimState:
    k: int
    history: IterateHistory
    config: SolverConfig
    table: AliasTable
    selection: UniformStream
    delay_rng: np.random.Generator
    recent: deque
    gamma: np.ndarray

    @classmethod
    def initial(cls, problem: CompositeProblem, config: SolverConfig,
                x0: Optional[np.ndarray] = None) -> "SimState":
        if config.probabilities.m != problem.m:
            raise StructuralError("config and problem disagree on the number of blocks")
        x0 = np.zeros(problem.dim) if x0 is None else problem.layout.check_vector(x0).copy()
        sel, dly = make_streams(config.seed)
        assert SELECTION == 0 and DELAYS == 1
        return cls(
            k=0,
            history=IterateHistory(problem.layout, config.tau, x0),
            config=config,
            table=AliasTable(config.probabilities.p),
            selection=UniformStream(sel),
            delay_rng=dly,
            recent=deque(maxlen=max(config.tau, 1)),
            gamma=np.asarray(config.stepsizes.gamma, dtype=float),
        )

    @property
    def x(self) -> np.ndarray:
        return self.history.current


def sim_step(state: SimState, problem: CompositeProblem, verify: bool = False) -> StepRecord:
    """Advance ``state`` by one iteration in place and describe the step."""
    k = state.k
    hist = state.history
    i = state.table.draw(state.selection.next())
    d = state.config.delay.generate(k, problem.m, state.delay_rng)
    ok = verify_decomposition(hist, state.recent, k, d) if verify else None
    x_hat = hist.read(d)
    g = state.gamma[i]
    sl = problem.layout.slice(i)
    x_i = hist.current[sl]
    new = problem.prox(i, x_i - g * problem.partial_gradient(x_hat, i), g)
    diff = x_i - new
    step = float(diff @ diff)
    hist.advance(i, new)
    state.k = k + 1
    rec = StepRecord(k, i, d, step, ok)
    state.recent.append(rec)
    return rec


def verify_decomposition(history: IterateHistory, step_records: Sequence[StepRecord], k: int,
                         d) -> bool:
    """Check ``x^k = x^{k-d^k} - sum_{h in J(k)} (x^h - x^{h+1})`` bitwise.

    ``J(k) = {h in [k - tau, k - 1] : h >= k - d^k_{i_h}}``, rebuilt from the
    selected blocks in ``step_records``.  Because ``x^h - x^{h+1}`` is supported
    on block ``i_h`` only, the sum is applied in increasing ``h`` as block
    replacements, each guarded by an exact equality with ``x^h``; no rounding
    enters, so the identity must hold bit for bit.
    """
    d = np.asarray(d, dtype=np.int64)
    tau = history.tau
    layout = history.layout
    if k != history.newest:
        raise ContractError(f"history is at iteration {history.newest}, check requested at {k}")
    by_k = {r.k: r for r in step_records}
    lo = max(0, k - tau)
    missing = [h for h in range(lo, k) if h not in by_k]
    if missing:
        raise ContractError(f"step records missing for iterations {missing}")
    recon = delayed_read(history, k, d).copy()
    for h in range(lo, k):
        i = by_k[h].block
        if h < k - d[i]:
            continue
        sl = layout.slice(i)
        before, after = history.get(h), history.get(h + 1)
        untouched = np.ones(layout.dim, dtype=bool)
        untouched[sl] = False
        if not np.array_equal(before[untouched], after[untouched]):
            return False
        if not np.array_equal(recon[sl], before[sl]):
            return False
        recon[sl] = after[sl]
    return bool(np.array_equal(recon, history.get(k)))


@dataclass
class SimResult:
    x: np.ndarray
    trace: Trace
    iterations: int
    converged: bool
    delta: float
    steps: Optional[list] = None
    decomposition_failures: int = 0


def _alpha_weights(tau: int) -> np.ndarray:
    return np.arange(1, tau + 1, dtype=float)


def run_sim(problem: CompositeProblem, config: SolverConfig, x0=None, *,
            allow_unsafe: bool = False, verify: bool = False,
            keep_steps: bool = False) -> SimResult:
    """Run the simulated algorithm until ``max_iters`` or the residual tolerance.

    Every ``trace_every`` iterations (and at the end) a :class:`TraceRecord`
    stores ``F(x^k)``, the forward-backward residual, the Lyapunov value
    ``F(x^k) + alpha~_k``, the squared length of step ``k`` and its largest
    delay.  The residual is measured in the ``Gamma^-1`` metric of the run's
    stepsizes.

    Raises
    ------
    StepsizeRuleError
        If ``delta >= 2`` and ``allow_unsafe`` is false.
    """
    delta = compute_delta(config.stepsizes, problem.lipschitz, config.probabilities, config.tau)
    if delta >= 2.0 and not allow_unsafe:
        raise StepsizeRuleError(
            f"stepsize rule violated: delta = {delta!r} >= 2 (pass allow_unsafe to override)")
    state = SimState.initial(problem, config, x0)
    tau = config.tau
    L_res = problem.lipschitz.residual
    weights = _alpha_weights(tau)
    window = np.zeros(tau)  # squared step lengths of iterations k - tau .. k - 1
    trace = Trace(meta={"problem": problem.name, "seed": config.seed, "tau": tau,
                        "delay": config.delay.kind, "rule": config.stepsizes.rule})
    steps = [] if keep_steps else None
    failures = 0
    converged = False

    while True:
        k = state.k
        at_end = k >= config.max_iters
        pending = None
        if at_end or k % config.trace_every == 0:
            x = state.x
            F = problem.F(x)
            res = _residual(problem, x, state.gamma)
            lyap = F + 0.5 * L_res * float(weights @ window) if tau else F
            pending = TraceRecord(k=k, F=F, residual=res, lyapunov=lyap)
            if res <= config.residual_tol:
                converged = True
                at_end = True
            if at_end:
                trace.append(pending)
                break
        rec = sim_step(state, problem, verify=verify)
        if tau:
            window[:-1] = window[1:]
            window[-1] = rec.step_norm_sq
        if verify and not rec.decomposition_ok:
            failures += 1
        if keep_steps:
            steps.append(rec)
        if pending is not None:
            pending.step_norm_sq = rec.step_norm_sq
            pending.staleness = int(rec.delay.max()) if rec.delay.size else 0
            trace.append(pending)

    return SimResult(x=state.x.copy(), trace=trace, iterations=state.k, converged=converged,
                     delta=delta, steps=steps, decomposition_failures=failures)


def candidate_blocks(problem: CompositeProblem, x: np.ndarray, x_hat: np.ndarray,
                     gamma) -> np.ndarray:
    """``x_bar^{k+1}``: the prox-gradient update of every block from the read ``x_hat``."""
    gamma = np.asarray(gamma, dtype=float)
    out = np.empty(problem.dim)
    for i in range(problem.m):
        sl = problem.layout.slice(i)
        out[sl] = problem.prox(i, x[sl] - gamma[i] * problem.partial_gradient(x_hat, i), gamma[i])
    return out


def metric_identity_sides(problem: CompositeProblem, x: np.ndarray, x_hat: np.ndarray, gamma,
                          p, z: np.ndarray):
    """Both sides of the conditional-expectation identity, by enumerating ``i_k``.

    Returns ``(lhs, rhs)`` with
    ``lhs = sum_i p_i |x^{k+1}(i) - z|_W^2 - |x^k - z|_W^2`` and
    ``rhs = |x_bar^{k+1} - z|_{Gamma^-1}^2 - |x^k - z|_{Gamma^-1}^2``.
    """
    layout = problem.layout
    gamma = np.asarray(gamma, dtype=float)
    p = np.asarray(getattr(p, "p", p), dtype=float)
    w_W = 1.0 / (gamma * p)
    w_G = 1.0 / gamma
    x_bar = candidate_blocks(problem, x, x_hat, gamma)
    base_W = float(w_W @ layout.block_sq_norms(x - z))
    expected = 0.0
    for i in range(problem.m):
        nxt = x.copy()
        sl = layout.slice(i)
        nxt[sl] = x_bar[sl]
        expected += p[i] * float(w_W @ layout.block_sq_norms(nxt - z))
    lhs = expected - base_W
    rhs = float(w_G @ layout.block_sq_norms(x_bar - z)) - float(w_G @ layout.block_sq_norms(x - z))
    return lhs, rhs
