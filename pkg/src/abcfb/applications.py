"""Built-in problems: the Lasso and the dual of ridge regression.

Lasso::

    minimize_x  1/2 |A x - b|^2 + lam |x|_1,   A in R^{n x m}

with one scalar block per column, ``L_i = |a_i|^2`` and ``L_res = |A|^2``.

Ridge regression on samples ``x_1..x_m`` (rows of ``X``)::

    minimize_w  1/(lam m) sum_i (y_i - <w, x_i>)^2 + 1/2 |w|^2

is solved through its dual ``1/2 <(K + lam m I) u, u> - <y, u>`` with
``K = X X^T``; the primal iterate is tracked as ``w = X^T u``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ParameterError, StructuralError
from .problem import (BlockLayout, CompositeProblem, L1Norm, LipschitzData, ReferenceOptimum,
                      ZeroFunction, spectral_norm)
from .sampling import AliasTable, UniformStream, make_streams
from .simulator import SolverConfig
from .trace import Trace, TraceRecord

__all__ = [
    "NORM_MARGIN",
    "soft_threshold",
    "LassoInstance",
    "make_lasso",
    "random_lasso",
    "RidgeDualInstance",
    "make_ridge_dual",
    "random_ridge",
    "ridge_dual_step",
    "run_ridge_tracking",
    "RidgeTrackingResult",
]

# relative inflation of power-iteration norm estimates before they enter a stepsize
NORM_MARGIN = 1e-6


def soft_threshold(v, rho):
    """``sign(v) max(|v| - rho, 0)``, the prox of ``rho |.|``."""
    if np.any(np.asarray(rho) < 0):
        raise ParameterError(f"threshold must be nonnegative, got {rho}")
    v = np.asarray(v, dtype=float)
    out = np.sign(v) * np.maximum(np.abs(v) - rho, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LassoInstance:
    A: np.ndarray
    b: np.ndarray
    lam: float
    col_norms_sq: np.ndarray
    spectral_norm_sq: float
    x_planted: Optional[np.ndarray] = field(default=None, compare=False)

    @property
    def lambda_max(self) -> float:
        """Smallest ``lam`` for which ``x = 0`` is optimal: ``|A^T b|_inf``."""
        return float(np.max(np.abs(self.A.T @ self.b)))


def make_lasso(A, b, lam: float, *, x_planted=None, norm_tol: float = 1e-10,
               norm_max_iter: int = 10_000, seed: int = 0) -> CompositeProblem:
    """Lasso as a :class:`CompositeProblem` with scalar blocks.

    ``L_res`` is the power-iteration estimate of ``|A|^2`` inflated by
    :data:`NORM_MARGIN`, and never below ``max_i |a_i|^2``.
    """
    A = np.ascontiguousarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.ndim != 2:
        raise StructuralError(f"A must be a matrix, got shape {A.shape}")
    if b.shape != (A.shape[0],):
        raise StructuralError(f"b has length {b.size}, A has {A.shape[0]} rows")
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    col_sq = np.einsum("ij,ij->j", A, A)
    if np.any(col_sq == 0):
        zero = np.flatnonzero(col_sq == 0).tolist()
        raise ParameterError(f"zero columns {zero} give L_i = 0; remove them")
    sigma = spectral_norm(A, tol=norm_tol, max_iter=norm_max_iter, seed=seed)
    L_res = max(sigma * sigma * (1.0 + NORM_MARGIN), float(col_sq.max()))
    inst = LassoInstance(A, b, float(lam), col_sq, sigma * sigma,
                         None if x_planted is None else np.asarray(x_planted, dtype=float))
    At = np.ascontiguousarray(A.T)

    def value(x):
        r = A @ x - b
        return 0.5 * float(r @ r)

    def partial(x, i):
        return At[i : i + 1] @ (A @ x - b)

    def gradient(x):
        return At @ (A @ x - b)

    return CompositeProblem(
        layout=BlockLayout.scalar(A.shape[1]),
        smooth_value=value,
        partial_gradient=partial,
        nonsmooth=L1Norm(lam),
        lipschitz=LipschitzData(col_sq, L_res),
        gradient=gradient,
        smooth_lipschitz=L_res,
        name="lasso",
        instance=inst,
    )


def random_lasso(n: int = 50, m: int = 100, sparsity: int = 10, noise: float = 0.01,
                 lam_ratio: float = 0.1, seed: int = 0) -> CompositeProblem:
    """Seeded Lasso with a planted sparse solution.

    ``A`` has i.i.d. ``N(0, 1/n)`` entries (columns of norm close to one), the
    planted ``x`` has ``sparsity`` nonzeros drawn ``N(0, 1)`` on a random
    support, ``b = A x + noise * N(0, 1)``, and ``lam = lam_ratio |A^T b|_inf``.
    """
    if not 0 <= sparsity <= m:
        raise ParameterError(f"sparsity must lie in [0, {m}]")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, m)) / math.sqrt(n)
    x_true = np.zeros(m)
    support = rng.choice(m, size=sparsity, replace=False)
    x_true[support] = rng.standard_normal(sparsity)
    b = A @ x_true + noise * rng.standard_normal(n)
    lam = lam_ratio * float(np.max(np.abs(A.T @ b)))
    return make_lasso(A, b, lam, x_planted=x_true, seed=seed)


@dataclass
class RidgeDualInstance:
    """Data of the dual ridge problem plus the tracked primal ``w = X^T u``.

    ``u`` and ``w`` are mutable state owned by whoever runs the kernel;
    ``lock`` guards the primal accumulator in concurrent use.
    """

    X: np.ndarray
    y: np.ndarray
    lam: float
    K: np.ndarray
    u: np.ndarray
    w: np.ndarray
    lock: object = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def reg(self) -> float:
        """``lam * m``."""
        return self.lam * self.m

    def dual_objective(self, u) -> float:
        return 0.5 * float(u @ (self.K @ u)) + 0.5 * self.reg * float(u @ u) - float(self.y @ u)

    def solve(self) -> np.ndarray:
        """Exact dual minimizer ``(K + lam m I)^{-1} y``."""
        return np.linalg.solve(self.K + self.reg * np.eye(self.m), self.y)

    def optimal_value(self) -> float:
        """``-1/2 <y, (K + lam m I)^{-1} y>``."""
        return -0.5 * float(self.y @ self.solve())

    def kkt_gap(self) -> float:
        """``max |w - X^T u|``."""
        return float(np.max(np.abs(self.w - self.X.T @ self.u))) if self.w.size else 0.0

    def reset(self, u0=None):
        self.u = np.zeros(self.m) if u0 is None else np.array(u0, dtype=float)
        self.w = self.X.T @ self.u


def make_ridge_dual(X, y, lam: float, *, seed: int = 0, norm_tol: float = 1e-10):
    """Dual ridge problem with scalar blocks ``u_i``; ``g`` is zero.

    Returns ``(problem, instance)``.  ``L_i = K_ii + lam m`` and ``L_res`` is
    the inflated power-iteration estimate of ``|K + lam m I|``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape != (X.shape[0],):
        raise StructuralError(f"y has length {y.size}, X has {X.shape[0]} samples")
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    m = X.shape[0]
    K = X @ X.T
    reg = lam * m
    inst = RidgeDualInstance(X, y, float(lam), K, np.zeros(m), np.zeros(X.shape[1]))
    H = K + reg * np.eye(m)
    L_i = np.diag(H).copy()
    sigma = spectral_norm(H, tol=norm_tol, seed=seed)
    L_res = max(sigma * (1.0 + NORM_MARGIN), float(L_i.max()))

    def value(u):
        return 0.5 * float(u @ (H @ u)) - float(y @ u)

    def partial(u, i):
        return H[i : i + 1] @ u - y[i : i + 1]

    def gradient(u):
        return H @ u - y

    u_star = inst.solve()
    problem = CompositeProblem(
        layout=BlockLayout.scalar(m),
        smooth_value=value,
        partial_gradient=partial,
        nonsmooth=ZeroFunction(),
        lipschitz=LipschitzData(L_i, L_res),
        gradient=gradient,
        smooth_lipschitz=L_res,
        reference_optimum=ReferenceOptimum(-0.5 * float(y @ u_star), "closed_form_linear_solve",
                                           x=u_star, residual=0.0),
        name="ridge_dual",
        instance=inst,
    )
    return problem, inst


def random_ridge(m: int = 50, d: int = 20, lam: float = 0.1, noise: float = 0.1,
                 seed: int = 0):
    """Seeded ridge data: rows of ``X`` i.i.d. ``N(0, I/d)``, ``y = X w0 + noise``.

    Returns ``(problem, instance)`` as :func:`make_ridge_dual`.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, d)) / math.sqrt(d)
    w0 = rng.standard_normal(d)
    y = X @ w0 + noise * rng.standard_normal(m)
    return make_ridge_dual(X, y, lam, seed=seed)


def ridge_dual_step(instance: RidgeDualInstance, i: int, gamma: float, delayed_w: np.ndarray,
                    delayed_u_i: float, lock=None):
    """One dual coordinate step with primal tracking.

    ``u_i <- u_i - gamma (<x_i, w_read> + lam m u_i_read - y_i)`` followed by
    ``w <- w + x_i (u_i_new - u_i_old)``, which keeps ``w = X^T u``.  The
    primal update runs under ``lock`` when one is given; the dual cell is
    written without coordination.

    Returns the new ``u_i``.
    """
    x_i = instance.X[i]
    old = instance.u[i]
    grad = float(x_i @ delayed_w) + instance.reg * delayed_u_i - instance.y[i]
    new = old - gamma * grad
    instance.u[i] = new
    diff = new - old
    if diff != 0.0:
        if lock is None:
            instance.w += diff * x_i
        else:
            with lock:
                instance.w += diff * x_i
    return new


@dataclass
class RidgeTrackingResult:
    u: np.ndarray
    w: np.ndarray
    trace: Trace
    max_kkt_gap: float


def run_ridge_tracking(problem: CompositeProblem, config: SolverConfig, u0=None) -> RidgeTrackingResult:
    """Serial run of the dual ridge kernel with uniform delays.

    Reads ``(w, u)`` from the snapshot ``d^k`` iterations back (the same delay
    on every coordinate, drawn from ``config.delay``) and checks after every
    step that ``w = X^T u`` still holds.
    """
    inst: RidgeDualInstance = problem.instance
    if not isinstance(inst, RidgeDualInstance):
        raise StructuralError("run_ridge_tracking needs a problem from make_ridge_dual")
    if config.delay.kind == "per_block_uniform_iid":
        raise ParameterError("ridge tracking needs the same delay on every coordinate")
    inst.reset(u0)
    tau = config.tau
    cap = tau + 1
    u_ring = np.empty((cap, inst.m))
    w_ring = np.empty((cap, inst.w.size))
    u_ring[0], w_ring[0] = inst.u, inst.w
    sel, dly = make_streams(config.seed)
    table = AliasTable(config.probabilities.p)
    stream = UniformStream(sel)
    gamma = config.stepsizes.gamma
    trace = Trace(meta={"problem": "ridge_dual_tracking", "seed": config.seed, "tau": tau})
    worst = 0.0
    for k in range(config.max_iters):
        if k % config.trace_every == 0:
            trace.append(TraceRecord(k=k, F=inst.dual_objective(inst.u)))
        i = table.draw(stream.next())
        d = int(config.delay.generate(k, 1, dly)[0])
        slot = (k - d) % cap
        ridge_dual_step(inst, i, gamma[i], w_ring[slot], u_ring[slot, i])
        u_ring[(k + 1) % cap], w_ring[(k + 1) % cap] = inst.u, inst.w
        worst = max(worst, inst.kkt_gap())
    trace.append(TraceRecord(k=config.max_iters, F=inst.dual_objective(inst.u)))
    return RidgeTrackingResult(inst.u.copy(), inst.w.copy(), trace, worst)

