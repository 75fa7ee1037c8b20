"""Lasso under simulated delays.

Builds the seeded Lasso instance (50 x 100, ten planted nonzeros), runs the
delay simulator for several delay bounds with the largest stepsizes the
convergence theory allows, and prints how far each run got.

    python3 demos/lasso_delays.py
"""

from abcfb import SolverConfig, estimate_F_star, fit_linear_rate, random_lasso, run_sim

problem = random_lasso(seed=0)
F_star = estimate_F_star(problem).value
print(f"F* = {F_star:.12f}  (lambda = {problem.instance.lam:.4f})")

for tau in (0, 5, 20, 50):
    cfg = SolverConfig.for_problem(problem, tau=tau, rule="theorem", max_iters=10000,
                                   trace_every=100)
    res = run_sim(problem, cfg)
    gap = res.trace.records[-1].F - F_star
    rho = fit_linear_rate(res.trace, F_star, tau)
    print(f"tau={tau:3d}  gamma_max={cfg.stepsizes.gamma_max:.4f}  "
          f"F - F* = {gap:.3e}  rho per {tau + 1} steps = {rho:.4f}")

# Larger delay bounds force smaller steps, so progress per iteration drops.
# At tau=0 the steps sit just below 2/L_i, where each coordinate update almost
# overshoots its minimizer; that run is slower than tau=5 for the same reason.
