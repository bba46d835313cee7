# %% [markdown]
# Quickstart: a sparse least-squares problem solved with variance-reduced
# dual averaging, checked against a high-precision reference.

# %%
import numpy as np

from vrda import (
    CompositeProblem,
    Regularizer,
    SolverConfig,
    SyntheticSpec,
    compute_reference,
    generate_synthetic,
    nnz,
    svrda_run,
)

# %%
# 500 samples, 60 features, 8 of them carry signal
ds, x_true = generate_synthetic(SyntheticSpec(n=500, d=60, k=8, noise_std=0.3, seed=0))
problem = CompositeProblem(ds.X, ds.y, "squared", Regularizer.lasso(0.05))
print(f"n={problem.n} d={problem.d} Lbar={problem.lbar:.2f} Lmax={problem.lmax:.2f}")

# %%
# the gap baseline: proximal gradient descent run to 1e-10
x_star, p_star = compute_reference(problem, tol=1e-10)
print("reference objective", p_star, "nnz", nnz(x_star))

# %%
# 20 effective passes over the data; the trace records the gap every pass
res = svrda_run(problem, SolverConfig(max_grad_evals=20 * problem.n, p_star=p_star, seed=1))
for row in res.trace.rows[::4]:
    print(f"passes={row.grad_evals / problem.n:5.1f}  stage={row.stage}  gap={row.objective_gap:.2e}  nnz={row.nnz}")

# %%
found = set(np.flatnonzero(res.x_tilde))
print("true support recovered:", len(found & set(np.flatnonzero(x_true))), "of", int(np.count_nonzero(x_true)))
