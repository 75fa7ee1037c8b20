"""Per-run descent of F + alpha~ under the monotone stepsize rule.

With the sublevel rule the quantity F(x^k) + alpha~_k never increases along a
single run, whatever the delays.  The theorem rule allows longer steps; the
same quantity then only decreases on average.

    python3 demos/lyapunov_check.py
"""

from abcfb import SolverConfig, lyapunov_violations, random_lasso, run_sim

problem = random_lasso(seed=0)
for rule in ("sublevel", "theorem"):
    bad = 0
    for seed in range(20):
        cfg = SolverConfig.for_problem(problem, tau=10, rule=rule, seed=seed, max_iters=500,
                                       trace_every=1)
        bad += lyapunov_violations(run_sim(problem, cfg).trace)
    print(f"{rule:9s} rule: {bad} increases of F + alpha~ over 20 runs")
