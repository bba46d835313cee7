"""Benchmark driver: reference solutions, metrics, and solver grids.

A grid run builds one problem, solves it once to high precision with
proximal gradient descent, then runs every ``(solver, seed)`` pair against
the same gradient-evaluation budget.  Each run writes one CSV with columns
``grad_evals,stage,objective_gap,nnz,wallclock_s`` and the grid writes a
``manifest.json`` describing all runs.
"""
import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .data import SyntheticSpec, generate_synthetic, load_libsvm, normalize_features
from .optimizers import SOLVERS, SolverConfig
from .problem import CompositeProblem, Regularizer
from .trace import RunTrace, nnz

__all__ = [
    "ConvergenceError",
    "ExperimentConfig",
    "ExperimentResult",
    "compute_reference",
    "objective_gap",
    "nnz",
    "make_solver",
    "build_problem",
    "run_experiment",
    "RunTrace",
    "THREADS_ENV",
]

THREADS_ENV = "VRDA_BENCH_THREADS"
MAX_REFERENCE_ITERS = 10**7


class ConvergenceError(RuntimeError):
    pass


def compute_reference(problem, tol=1e-10, max_iter=MAX_REFERENCE_ITERS, x0=None):
    """High-precision minimizer by proximal gradient descent with step ``1/Lbar``.

    Iterates until the proximal-gradient mapping satisfies
    ``||x - prox(x - grad F(x)/Lbar)|| <= tol * max(1, ||x||)``, then takes
    five more steps.

    Returns
    -------
    x_star : ndarray
    p_star : float
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    h = 1.0 / problem.lbar
    prox = problem.reg.prox
    x = np.zeros(problem.d) if x0 is None else np.array(x0, dtype=np.float64)
    for _ in range(max_iter):
        x_new = prox(x - h * problem.grad(x), h)
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        if step <= tol * max(1.0, float(np.linalg.norm(x))):
            break
    else:
        raise ConvergenceError(f"reference solver did not reach tol={tol} in {max_iter} iterations")
    for _ in range(5):
        x = prox(x - h * problem.grad(x), h)
    return x, problem.value(x)


def objective_gap(problem, x, p_star, tol=None):
    """``P(x) - p_star``; values below ``-10 tol`` are clamped with a warning."""
    gap = problem.value(x) - p_star
    if tol is not None and gap < -10.0 * tol:
        warnings.warn(f"objective gap {gap:.3e} is below -10*tol; the reference is too loose",
                      RuntimeWarning, stacklevel=2)
        gap = -10.0 * tol
    return gap


# solver id -> (runner key, forced config fields)
_SOLVER_IDS = {
    "svrda-x": ("svrda", {"output": "x"}),
    "svrda-v": ("svrda", {"output": "v"}),
    "sada-x": ("sada", {"output": "x"}),
    "sada-v": ("sada", {"output": "v"}),
    "svrda": ("svrda", {"output": "x"}),
    "sada": ("sada", {"output": "x"}),
    "svrg": ("svrg", {}),
    "saga": ("saga", {}),
    "prox-gd": ("prox-gd", {}),
    "prox-sgd": ("prox-sgd", {}),
    "rda": ("rda", {}),
}


def make_solver(solver_id):
    """Return ``(run_fn, forced_fields)`` for a solver id such as ``"svrda-v"``."""
    try:
        key, forced = _SOLVER_IDS[solver_id]
    except KeyError:
        raise ValueError(f"unknown solver {solver_id!r}; known: {sorted(_SOLVER_IDS)}") from None
    return SOLVERS[key], dict(forced)


_SOLVER_FIELDS = {f.name for f in fields(SolverConfig)}


@dataclass
class ExperimentConfig:
    """Grid description; mirrors the JSON accepted by ``bench run``.

    Exactly one of ``data`` (a libsvm path) and ``synthetic`` (keyword
    arguments of :class:`SyntheticSpec`) must be given.  ``budget`` is in
    single-sample gradient evaluations.
    """

    solvers: list
    seeds: list = field(default_factory=lambda: [0])
    budget: int = 10_000
    loss: str = "logistic"
    l1: float = 0.0
    l2: float = 0.0
    data: str = None
    synthetic: dict = None
    binary: bool = None
    normalize: bool = False
    overrides: dict = field(default_factory=dict)
    reference_tol: float = 1e-10
    checkpoint_every: int = None
    record_wallclock: bool = False
    nnz_threshold: float = 0.0
    name: str = "experiment"

    def __post_init__(self):
        if not self.budget > 0:
            raise ValueError(f"budget must be positive, got {self.budget}")
        if self.l1 < 0 or self.l2 < 0:
            raise ValueError("l1 and l2 must be nonnegative")
        if (self.data is None) == (self.synthetic is None):
            raise ValueError("give exactly one of 'data' and 'synthetic'")
        if not self.solvers:
            raise ValueError("no solvers listed")
        for sid in self.solvers:
            make_solver(sid)
        for sid, ov in self.overrides.items():
            bad = set(ov) - _SOLVER_FIELDS
            if bad:
                raise ValueError(f"unknown override fields for {sid}: {sorted(bad)}")
        if not self.reference_tol > 0:
            raise ValueError("reference_tol must be positive")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise ValueError(f"unknown experiment fields: {sorted(bad)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)


@dataclass
class ExperimentResult:
    traces: list
    manifest: dict
    out_dir: str = None

    @property
    def ok(self):
        return all(r["status"] == "ok" for r in self.manifest["runs"])


def build_problem(cfg):
    """Dataset and problem for an :class:`ExperimentConfig`."""
    binary = cfg.binary if cfg.binary is not None else cfg.loss == "logistic"
    if cfg.synthetic is not None:
        spec = dict(cfg.synthetic)
        spec.setdefault("label_kind", "binary" if binary else "regression")
        ds, _ = generate_synthetic(SyntheticSpec(**spec))
    else:
        ds = load_libsvm(cfg.data, binary=binary)
    if cfg.normalize:
        ds = normalize_features(ds)
    return CompositeProblem(ds.X, ds.y, cfg.loss, Regularizer(cfg.l1, cfg.l2))


def _csv_name(solver_id, seed):
    return f"{solver_id}__seed{seed}.csv"


def _run_one(problem, cfg, solver_id, seed, p_star):
    run, forced = make_solver(solver_id)
    base = {
        "seed": seed,
        "max_grad_evals": cfg.budget,
        "checkpoint_every": cfg.checkpoint_every,
        "p_star": p_star,
        "gap_floor": -10.0 * cfg.reference_tol,
        "record_wallclock": cfg.record_wallclock,
        "nnz_threshold": cfg.nnz_threshold,
    }
    base.update(cfg.overrides.get(solver_id, {}))
    base.update(forced)
    result = run(problem, SolverConfig(**base))
    result.trace.solver_id = solver_id
    return result


def run_experiment(cfg, out_dir=None, workers=None):
    """Run every ``(solver, seed)`` pair of ``cfg``; write CSVs and a manifest.

    A failing run is recorded in the manifest with its error message and the
    grid continues.  ``workers`` defaults to the ``VRDA_BENCH_THREADS``
    environment variable (1 if unset).
    """
    if isinstance(cfg, dict):
        cfg = ExperimentConfig.from_dict(cfg)
    problem = build_problem(cfg)
    x_star, p_star = compute_reference(problem, tol=cfg.reference_tol)
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1"))
    grid = [(sid, seed) for sid in cfg.solvers for seed in cfg.seeds]

    def task(item):
        sid, seed = item
        try:
            return sid, seed, _run_one(problem, cfg, sid, seed, p_star), None
        except Exception as exc:  # recorded, grid continues
            return sid, seed, None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(task, grid))
    else:
        outcomes = [task(item) for item in grid]

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    runs, traces = [], []
    for sid, seed, result, err in outcomes:
        entry = {"solver": sid, "seed": seed}
        if err is not None:
            entry.update(status="failed", error=err)
            runs.append(entry)
            continue
        trace = result.trace
        traces.append(trace)
        last = trace.rows[-1]
        entry.update(
            status="ok",
            csv=_csv_name(sid, seed),
            total_grad_evals=result.total_grad_evals,
            guaranteed_output=trace.guaranteed_output,
            final_objective_gap=last.objective_gap,
            final_nnz=last.nnz,
            metadata=trace.metadata,
        )
        if out_dir is not None:
            with open(os.path.join(out_dir, entry["csv"]), "w", encoding="utf-8", newline="") as fh:
                trace.to_csv(fh)
        runs.append(entry)

    manifest = {
        "name": cfg.name,
        "config": cfg.to_dict(),
        "n": problem.n,
        "d": problem.d,
        "lbar": problem.lbar,
        "lmax": problem.lmax,
        "p_star": p_star,
        "reference_nnz": nnz(x_star),
        "runs": runs,
    }
    if out_dir is not None:
        with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    return ExperimentResult(traces, manifest, out_dir)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
