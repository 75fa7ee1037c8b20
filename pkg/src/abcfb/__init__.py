"""Asynchronous randomized block-coordinate forward-backward solver."""

from .errors import (AbcfbError, ContractError, EngineAbort, OracleFailure, ParameterError,
                     StepsizeRuleError, StructuralError)
from .problem import (BlockLayout, BoxIndicator, CompositeProblem, IndicatorZero, L1Norm,
                      LipschitzData, QuadraticSmooth, ReferenceOptimum, WeightVector,
                      ZeroFunction, eval_F, full_gradient, partial_grad, prox_block,
                      prox_grad_residual, spectral_norm, weighted_norm_sq)
from .stepsize import (BlockProbabilities, RateConstants, StepsizeSchedule, compute_delta,
                       manual_stepsizes, max_stepsizes, rate_constants)
from .simulator import (DelayModel, IterateHistory, SimResult, SolverConfig, delayed_read,
                        gen_delay, run_sim, sim_step, verify_decomposition)
from .trace import TRACE_HEADER, Trace, TraceRecord, read_trace_csv, write_trace_csv
from .diagnostics import (RateReport, alpha_k, alpha_tilde_k, check_sublinear,
                          estimate_F_star, fit_linear_rate, lyapunov_violations)
from .applications import (make_lasso, make_ridge_dual, random_lasso, random_ridge,
                           ridge_dual_step, soft_threshold)
from .async_engine import StalenessStats, measure_staleness, run_async, run_async_ridge

__version__ = "0.1.0"

__all__ = [
    "AbcfbError",
    "ContractError",
    "EngineAbort",
    "OracleFailure",
    "ParameterError",
    "StepsizeRuleError",
    "StructuralError",
    "BlockLayout",
    "BoxIndicator",
    "CompositeProblem",
    "IndicatorZero",
    "L1Norm",
    "LipschitzData",
    "QuadraticSmooth",
    "ReferenceOptimum",
    "WeightVector",
    "ZeroFunction",
    "eval_F",
    "full_gradient",
    "partial_grad",
    "prox_block",
    "prox_grad_residual",
    "spectral_norm",
    "weighted_norm_sq",
    "BlockProbabilities",
    "RateConstants",
    "StepsizeSchedule",
    "compute_delta",
    "manual_stepsizes",
    "max_stepsizes",
    "rate_constants",
    "DelayModel",
    "IterateHistory",
    "SimResult",
    "SolverConfig",
    "delayed_read",
    "gen_delay",
    "run_sim",
    "sim_step",
    "verify_decomposition",
    "TRACE_HEADER",
    "Trace",
    "TraceRecord",
    "read_trace_csv",
    "write_trace_csv",
    "RateReport",
    "alpha_k",
    "alpha_tilde_k",
    "check_sublinear",
    "estimate_F_star",
    "fit_linear_rate",
    "lyapunov_violations",
    "make_lasso",
    "make_ridge_dual",
    "random_lasso",
    "random_ridge",
    "ridge_dual_step",
    "soft_threshold",
    "StalenessStats",
    "measure_staleness",
    "run_async",
    "run_async_ridge",
]
