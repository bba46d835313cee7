# %% [markdown]
# Linear convergence with an elastic-net penalty.
#
# With mu > 0 every stage has the same length ceil(eta / (2 mu)) and the
# quantity  gap + (3 mu / 2) ||v_tilde - x*||^2  halves in expectation per
# stage.  Both x_tilde and v_tilde are guaranteed outputs here.

# %%
import numpy as np

from vrda import (
    CompositeProblem,
    Regularizer,
    SolverConfig,
    SyntheticSpec,
    compute_reference,
    generate_synthetic,
    sada_run,
    svrda_run,
)

ds, _ = generate_synthetic(SyntheticSpec(n=500, d=50, k=10, noise_std=0.5, label_kind="binary", seed=0))
problem = CompositeProblem(ds.X, ds.y, "logistic", Regularizer.elastic_net(1e-2, 1e-2))
x_star, p_star = compute_reference(problem, tol=1e-13)

# %%
for run in (svrda_run, sada_run):
    res = run(problem, SolverConfig(stages=30, seed=0))
    meta = res.trace.metadata
    print(run.__name__, f"eta={meta['eta']:.3f} m1={meta['m1']} alpha={meta['alpha']}")
    for s in range(0, 31, 5):
        gap = problem.value(res.stage_x[s]) - p_star
        lyap = gap + 1.5 * problem.mu * np.sum((res.stage_v[s] - x_star) ** 2)
        print(f"  stage {s:2d}  evals={res.stage_evals[s]:7d}  gap={gap:.2e}  lyapunov={lyap:.2e}")
