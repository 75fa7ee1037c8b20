"""Lyapunov quantities, rate checks and the reference optimum.

The theory certifies two descent sequences:

* ``F(x^k) + alpha_k`` decreases in conditional expectation, where
  ``alpha_k = L_res^V / (2 sqrt(p_max)) sum_{h=k-tau}^{k-1} (h - (k - tau) + 1) |x^{h+1} - x^h|_V^2``
  and ``L_res^V = L_res sqrt(p_max / p_min)``;
* under the sublevel stepsize rule ``F(x^k) + alpha~_k`` decreases along every
  realization, with the same triangular weights, plain norms and factor
  ``L_res / 2``.

Steps before iteration 0 are zero, so the windows are zero-padded.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ContractError, OracleFailure, ParameterError
from .problem import CompositeProblem, QuadraticSmooth, ReferenceOptimum, ZeroFunction, _residual
from .trace import Trace

__all__ = [
    "triangular_weights",
    "alpha_k",
    "alpha_tilde_k",
    "alpha_tilde_series",
    "residual_lipschitz_V",
    "lyapunov_violations",
    "sublevel_violations",
    "SublinearCheck",
    "check_sublinear",
    "fit_linear_rate",
    "fit_iterate_rate",
    "estimate_F_star",
    "w_dist_sq",
    "RateReport",
    "format_report",
    "parse_report",
]


def triangular_weights(tau: int) -> np.ndarray:
    """Weights ``1, 2, ..., tau`` for steps ``k - tau, ..., k - 1``."""
    return np.arange(1, int(tau) + 1, dtype=float)


def _window(values, tau: int) -> np.ndarray:
    vals = np.asarray(values, dtype=float).reshape(-1)
    if vals.size > tau:
        raise ContractError(f"got {vals.size} step norms for a window of {tau}")
    # zero-pad the oldest entries (steps before iteration 0)
    return np.concatenate([np.zeros(tau - vals.size), vals])


def residual_lipschitz_V(L_res: float, p_min: float, p_max: float) -> float:
    """``L_res^V = L_res sqrt(p_max) / sqrt(p_min)``."""
    return L_res * math.sqrt(p_max) / math.sqrt(p_min)


def alpha_k(step_norms_V, tau: int, L_res_V: float, p_max: float) -> float:
    """Expectation-level Lyapunov correction.

    ``step_norms_V`` lists ``|x^{h+1} - x^h|_V^2`` for ``h = k - tau .. k - 1``,
    oldest first; a shorter list is zero-padded at the old end.
    """
    tau = int(tau)
    if tau == 0:
        return 0.0
    w = _window(step_norms_V, tau)
    return L_res_V / (2.0 * math.sqrt(p_max)) * float(triangular_weights(tau) @ w)


def alpha_tilde_k(step_norms_sq, tau: int, L_res: float) -> float:
    """Realization-level Lyapunov correction ``(L_res/2) sum_j j s_{k-tau-1+j}``."""
    tau = int(tau)
    if tau == 0:
        return 0.0
    w = _window(step_norms_sq, tau)
    return 0.5 * L_res * float(triangular_weights(tau) @ w)


def alpha_tilde_series(step_norms_sq, tau: int, L_res: float) -> np.ndarray:
    """``alpha~_k`` for ``k = 0 .. K`` from the steps ``s_0 .. s_{K-1}``, in O(K).

    Uses ``T_{k+1} = T_k - S_k + tau s_k`` where ``T_k`` is the weighted and
    ``S_k`` the plain sum over the window ending at ``k - 1``.
    """
    s = np.asarray(step_norms_sq, dtype=float).reshape(-1)
    tau = int(tau)
    out = np.zeros(s.size + 1)
    if tau == 0:
        return out
    T = 0.0
    S = 0.0
    for k in range(s.size):
        T = T - S + tau * s[k]
        S = S + s[k] - (s[k - tau] if k >= tau else 0.0)
        out[k + 1] = 0.5 * L_res * T
    return out


def lyapunov_violations(trace: Trace, tol: Optional[float] = None) -> int:
    """Strict increases of the ``lyapunov`` column beyond ``tol``.

    The default tolerance is ``1e-10 (1 + |F(x^0)|)``.
    """
    lyap = trace.column("lyapunov")
    if lyap.size < 2:
        return 0
    if tol is None:
        tol = 1e-10 * (1.0 + abs(trace.records[0].F))
    lyap = lyap[~np.isnan(lyap)]
    return int(np.count_nonzero(np.diff(lyap) > tol))


def sublevel_violations(trace: Trace, tol: Optional[float] = None) -> int:
    """Records with ``F(x^k) > F(x^0) + tol``."""
    F = trace.F
    if F.size == 0:
        return 0
    if tol is None:
        tol = 1e-10 * (1.0 + abs(F[0]))
    return int(np.count_nonzero(F > F[0] + tol))


def _mean_gap(traces, F_star: float):
    if isinstance(traces, Trace):
        traces = [traces]
    traces = list(traces)
    if not traces:
        raise ContractError("no traces given")
    ks = traces[0].k
    for t in traces[1:]:
        if not np.array_equal(t.k, ks):
            raise ContractError("replications must be recorded at the same iterations")
    F = np.mean([t.F for t in traces], axis=0)
    return ks, F - F_star, float(traces[0].records[0].F)


@dataclass
class SublinearCheck:
    """Outcome of the explicit ``O(1/k)`` bound check.

    ``decile_trend`` is a heuristic stand-in for the ``o(1/k)`` statement:
    ``k (F_k - F*)`` averaged over the last tenth of the records falls below
    its average over the first tenth.
    """

    violations: int
    margin: float
    checked: int
    sublinear_constant: float
    decile_trend: bool
    replications: int


def check_sublinear(traces: Union[Trace, Sequence[Trace]], F_star: Optional[float],
                    C_bound: float, W_dist0_sq: float) -> SublinearCheck:
    """Compare the replication mean of ``F(x^k) - F*`` with the ``O(1/k)`` bound.

    The bound at ``k >= 1`` is ``(W_dist0_sq / 2 + C_bound (F(x^0) - F*)) / k``.
    """
    if F_star is None:
        raise ContractError("check_sublinear needs a reference optimum F*")
    n_rep = 1 if isinstance(traces, Trace) else len(traces)
    ks, gap, F0 = _mean_gap(traces, F_star)
    mask = ks >= 1
    k = ks[mask].astype(float)
    g = gap[mask]
    bound = (0.5 * W_dist0_sq + C_bound * (F0 - F_star)) / k
    violations = int(np.count_nonzero(g > bound))
    margin = float(np.min(bound - g)) if k.size else math.inf
    scaled = k * g
    sup = float(np.max(scaled)) if k.size else 0.0
    tenth = max(1, scaled.size // 10)
    trend = bool(scaled.size >= 2 and np.mean(scaled[-tenth:]) < np.mean(scaled[:tenth]))
    return SublinearCheck(violations, margin, int(k.size), sup, trend, n_rep)


def _log_fit(x: np.ndarray, y: np.ndarray) -> float:
    A = np.column_stack([x, np.ones_like(x)])
    slope, _ = np.linalg.lstsq(A, y, rcond=None)[0]
    return float(slope)


def fit_linear_rate(traces: Union[Trace, Sequence[Trace]], F_star: float, tau: int,
                    floor: Optional[float] = None, start: int = 0) -> float:
    """Empirical linear factor of ``F(x^k) - F*`` per ``tau + 1`` iterations.

    Least-squares slope of ``log(F_k - F*)`` against ``floor(k / (tau + 1))``
    over records with ``k >= start`` whose gap exceeds ``floor`` (default
    ``1e-11 max(1, |F*|)``, below which rounding dominates); returns
    ``exp(slope)``.  Fewer than two usable records give ``nan`` and a warning.
    """
    ks, gap, _ = _mean_gap(traces, F_star)
    if floor is None:
        floor = 1e-11 * max(1.0, abs(F_star))
    mask = (ks >= start) & (gap > floor)
    if np.count_nonzero(mask) < 2:
        warnings.warn("linear-rate fit skipped: fewer than two records with positive gap",
                      RuntimeWarning, stacklevel=2)
        return math.nan
    epochs = np.floor_divide(ks[mask], int(tau) + 1).astype(float)
    if np.ptp(epochs) == 0:
        warnings.warn("linear-rate fit skipped: window spans a single epoch",
                      RuntimeWarning, stacklevel=2)
        return math.nan
    return math.exp(_log_fit(epochs, np.log(gap[mask])))


def fit_iterate_rate(ks, dists, tau: int, floor: float = 1e-12) -> float:
    """Linear factor fitted to iterate distances, squared to compare with values.

    Iterates converge like ``rho^{floor(k/(tau+1))/2}``, so the fitted
    per-epoch factor of ``dists`` is squared before it is returned.
    """
    ks = np.asarray(ks)
    dists = np.asarray(dists, dtype=float)
    mask = dists > floor
    if np.count_nonzero(mask) < 2:
        return math.nan
    epochs = np.floor_divide(ks[mask], int(tau) + 1).astype(float)
    if np.ptp(epochs) == 0:
        return math.nan
    return math.exp(2.0 * _log_fit(epochs, np.log(dists[mask])))


def w_dist_sq(problem: CompositeProblem, x0, x_ref, gamma, p) -> float:
    """``|x0 - x_ref|_W^2`` with ``W = diag(1 / (gamma_i p_i))``."""
    gamma = np.asarray(gamma, dtype=float)
    p = np.asarray(getattr(p, "p", p), dtype=float)
    diff = np.asarray(x0, dtype=float) - np.asarray(x_ref, dtype=float)
    return float((1.0 / (gamma * p)) @ problem.layout.block_sq_norms(diff))


def _closed_form(problem: CompositeProblem) -> Optional[ReferenceOptimum]:
    ref = problem.reference_optimum
    if ref is not None and ref.provenance.startswith("closed_form"):
        return ref
    f = problem.instance
    if isinstance(f, QuadraticSmooth) and isinstance(problem.nonsmooth, ZeroFunction):
        x, *_ = np.linalg.lstsq(f.Q, f.c, rcond=None)
        return ReferenceOptimum(f.value(x), "closed_form_normal_equations", x=x,
                                residual=float(np.linalg.norm(f.Q @ x - f.c)))
    return None


def estimate_F_star(problem: CompositeProblem, tol: float = 1e-12, max_iter: int = 200_000,
                    x0=None, closed_form: bool = True) -> ReferenceOptimum:
    """Reference optimal value with its provenance.

    Quadratic problems without a nonsmooth part are solved by linear algebra.
    Otherwise an accelerated proximal-gradient run with adaptive restart and
    uniform stepsize ``1 / L_f`` continues until the forward-backward residual
    (in that same metric) drops to ``tol``.

    Raises
    ------
    OracleFailure
        If ``tol`` is not reached within ``max_iter`` iterations.
    """
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    if closed_form:
        ref = _closed_form(problem)
        if ref is not None:
            return ref
    L = problem.full_lipschitz()
    step = 1.0 / L
    gamma = np.full(problem.m, step)
    x = np.zeros(problem.dim) if x0 is None else np.array(x0, dtype=float)
    y = x.copy()
    t = 1.0
    res = _residual(problem, x, gamma)
    for it in range(1, max_iter + 1):
        x_new = problem.prox_all(y - step * problem.full_gradient(y), gamma)
        if float((y - x_new) @ (x_new - x)) > 0.0:
            # momentum points uphill: restart from the plain step
            t = 1.0
            y = x_new
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        x = x_new
        if it % 10 == 0 or it == max_iter:
            res = _residual(problem, x, gamma)
            if res <= tol:
                return ReferenceOptimum(problem.F(x), "reference_accelerated_prox_gradient",
                                        x=x, residual=res)
    raise OracleFailure(
        f"reference solver stopped at residual {res:.3e} > tol {tol:.1e} after {max_iter} iterations")


@dataclass
class RateReport:
    sublinear_constant: float
    fitted_rho: float
    theory_rho: Optional[float]
    monotone_violations: int
    bound_violations: Optional[int] = None
    bound_margin: Optional[float] = None
    decile_trend: Optional[bool] = None
    replications: int = 1


def _fmt_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def format_report(items) -> str:
    """Line-oriented ``key=value`` text; accepts a mapping or a dataclass."""
    if hasattr(items, "__dataclass_fields__"):
        items = asdict(items)
    return "".join(f"{key}={_fmt_value(val)}\n" for key, val in items.items())


def parse_report(text: str) -> dict:
    """Inverse of :func:`format_report`, values left as strings."""
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ContractError(f"malformed report line {line!r}")
        out[key] = val
    return out
