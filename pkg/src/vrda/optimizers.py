"""Multistage variance-reduced dual averaging (SVRDA, SADA) and baselines.

Both proposed solvers run stages of inner steps that combine a dual
averaging update ``v_t`` anchored at the stage start with a proximal
gradient update ``x_t`` taken from the coupling point ``u_{t-1}``.  They
differ only in the gradient estimator: an SVRG snapshot with importance
sampling (SVRDA) or a SAGA gradient table with uniform sampling (SADA).
Neither needs to average iterates, so prox-induced zeros survive in the
returned solution.

The baselines (proximal GD, proximal SGD, RDA, prox-SVRG with averaging,
SAGA) share the same configuration object and trace format.
"""
import math
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from .estimators import (
    SAGA_EVALS_PER_STEP,
    SVRG_EVALS_PER_STEP,
    RunningAverage,
    SagaTable,
    SvrgAnchor,
    saga_estimate_and_update,
    svrg_estimate,
)
from .sampling import SeededRng, build_q, sample_nonuniform, sample_uniform
from .trace import Recorder, RunTrace

__all__ = [
    "ConfigError",
    "SolverConfig",
    "StageState",
    "RunResult",
    "stage_length",
    "default_alpha",
    "default_m1",
    "svrda_inner_step",
    "sada_inner_step",
    "svrda_run",
    "sada_run",
    "prox_gd_run",
    "prox_sgd_run",
    "rda_run",
    "svrg_run",
    "saga_run",
    "SOLVERS",
]


class ConfigError(ValueError):
    """Invalid or inconsistent solver settings."""


@dataclass
class SolverConfig:
    """Settings shared by every solver; ``None`` means "use the solver default".

    Attributes
    ----------
    eta : float
        Inverse step size.  SVRDA/prox-SVRG default ``4 * Lbar``, SADA
        ``5 * Lmax``, prox-GD ``Lbar``.  For RDA it is the ``gamma`` in
        ``eta_t = gamma * sqrt(t)`` (default ``Lmax``); for prox-SGD the
        base ``eta_0`` (default ``Lmax``).
    m1 : int
        First stage length.  Default ``ceil(eta / (2 mu))`` when ``mu > 0``
        and ``n`` otherwise; prox-SVRG uses ``2n``.
    stages : int
        Number of outer stages.  Either this or ``max_grad_evals`` must be set.
    alpha : float
        Weight of ``x_tilde`` in the next stage's dual anchor; default
        ``1/4`` if ``mu > 0`` else ``0``.
    iterations : int
        Step count for single-loop methods (GD, SGD, RDA, SAGA).
    step : float
        SAGA step size, default ``1 / (3 Lmax)``.
    max_grad_evals : int
        Budget in single-sample gradient evaluations; the run stops before
        the step that would exceed it.
    output : {"x", "v"}
        Which SVRDA/SADA iterate is traced and returned as ``result.output``.
        ``"v"`` requires ``mu > 0``.
    checkpoint_every : int
        Trace cadence in gradient evaluations (default ``n``).
    """

    eta: float = None
    m1: int = None
    stages: int = None
    alpha: float = None
    seed: int = 0
    iterations: int = None
    step: float = None
    max_grad_evals: int = None
    output: str = "x"
    x0: np.ndarray = None
    checkpoint_every: int = None
    p_star: float = 0.0
    gap_floor: float = None
    record_wallclock: bool = False
    keep_iterates: bool = False
    nnz_threshold: float = 0.0
    saga_storage: str = "scalar"

    def updated(self, **kw):
        return replace(self, **kw)


@dataclass
class StageState:
    """Inner-loop state of one SVRDA/SADA stage."""

    x: np.ndarray
    v: np.ndarray
    u: np.ndarray
    v0: np.ndarray
    gbar: RunningAverage
    t: int = 0

    @classmethod
    def start(cls, x_tilde, v_tilde, alpha):
        v0 = (1.0 - alpha) * v_tilde + alpha * x_tilde
        return cls(x=np.array(x_tilde, dtype=np.float64), v=v0.copy(), u=v0.copy(), v0=v0,
                   gbar=RunningAverage(v0.size))


@dataclass
class RunResult:
    """Outcome of one solver run.

    ``stage_x[s]`` / ``stage_v[s]`` hold ``x_tilde_s`` / ``v_tilde_s`` for
    ``s = 0..S`` (multistage methods only) and ``stage_evals[s]`` the
    gradient count when stage ``s`` ended.
    """

    x_tilde: np.ndarray
    v_tilde: np.ndarray
    trace: RunTrace
    total_grad_evals: int
    stage_x: list = field(default_factory=list)
    stage_v: list = field(default_factory=list)
    stage_evals: list = field(default_factory=list)
    output_name: str = "x_tilde"

    @property
    def output(self):
        """The iterate with a convergence guarantee (or the one requested)."""
        return self.v_tilde if self.output_name == "v_tilde" else self.x_tilde


_INT_MAX = sys.maxsize


def stage_length(m1, s, mu):
    """Inner steps in stage ``s``: ``m1`` if ``mu > 0``, else ``2**(s-1) * m1``."""
    if s < 1:
        raise ValueError(f"stage index starts at 1, got {s}")
    if mu > 0:
        return int(m1)
    m = (1 << (s - 1)) * int(m1)
    if m > _INT_MAX:
        raise ConfigError(f"stage {s} length 2**{s - 1} * {m1} exceeds the integer range")
    return m


def default_alpha(mu, override=None):
    if mu < 0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    if override is not None:
        if not 0.0 <= override <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {override}")
        return float(override)
    return 0.25 if mu > 0 else 0.0


def default_m1(eta, mu, n):
    """``ceil(eta / (2 mu))`` for ``mu > 0``, otherwise ``n``."""
    if mu > 0:
        r = eta / (2.0 * mu)
        # absorb rounding noise so an exact integer ratio is not bumped up
        return max(1, math.ceil(r - 1e-9 * max(1.0, r)))
    return int(n)


def _start_point(problem, cfg):
    if cfg.x0 is None:
        return np.zeros(problem.d)
    x0 = np.array(cfg.x0, dtype=np.float64)
    if x0.shape != (problem.d,):
        raise ConfigError(f"x0 must have length {problem.d}, got shape {x0.shape}")
    return x0


def _make_recorder(problem, cfg, trace):
    return Recorder(problem, trace, every=cfg.checkpoint_every, p_star=cfg.p_star,
                    wallclock=cfg.record_wallclock, keep_iterates=cfg.keep_iterates,
                    nnz_threshold=cfg.nnz_threshold, gap_floor=cfg.gap_floor)


def _dual_averaging_update(state, g, eta, reg):
    t = state.t + 1
    state.gbar.push(g)
    c = t / eta
    state.v = reg.prox(state.v0 - c * state.gbar.value, c)
    h = 1.0 / (eta * t)
    state.x = reg.prox(state.u - h * g, h)
    w = 1.0 / (t + 1)
    state.u = (1.0 - w) * state.x + w * state.v
    state.t = t
    return state


def svrda_inner_step(state, anchor, i, eta, problem, q):
    """One SVRDA inner step with sample ``i`` drawn from ``q``; mutates and returns ``state``."""
    g = svrg_estimate(anchor, i, state.u, q.weights[i], problem)
    return _dual_averaging_update(state, g, eta, problem.reg)


def sada_inner_step(state, table, i, eta, problem):
    """One SADA inner step with uniformly drawn ``i``; updates ``table`` in place."""
    g = saga_estimate_and_update(table, i, state.u, problem)
    return _dual_averaging_update(state, g, eta, problem.reg)


def _need_stopping_rule(cfg, count_field="stages"):
    if getattr(cfg, count_field) is None and cfg.max_grad_evals is None:
        raise ConfigError(f"set either {count_field} or max_grad_evals")


def _multistage(problem, cfg, method):
    cfg = cfg or SolverConfig()
    _need_stopping_rule(cfg)
    n, mu = problem.n, problem.mu
    if method == "svrda":
        eta = 4.0 * problem.lbar if cfg.eta is None else float(cfg.eta)
        if not eta > problem.lbar:
            raise ConfigError(f"SVRDA needs eta > Lbar = {problem.lbar:.6g}, got {eta:.6g}")
        per_step = SVRG_EVALS_PER_STEP
        q = build_q(problem.lipschitz)
    else:
        eta = 5.0 * problem.lmax if cfg.eta is None else float(cfg.eta)
        if not eta > problem.lmax:
            raise ConfigError(f"SADA needs eta > Lmax = {problem.lmax:.6g}, got {eta:.6g}")
        per_step = SAGA_EVALS_PER_STEP
    m1 = default_m1(eta, mu, n) if cfg.m1 is None else int(cfg.m1)
    if m1 < 1:
        raise ConfigError(f"m1 must be at least 1, got {m1}")
    alpha = default_alpha(mu, cfg.alpha)
    if cfg.output not in ("x", "v"):
        raise ConfigError(f"output must be 'x' or 'v', got {cfg.output!r}")
    if cfg.output == "v" and mu == 0:
        raise ConfigError("v_tilde has no convergence guarantee when mu = 0; use output='x'")

    rng = SeededRng(cfg.seed)
    x_tilde = _start_point(problem, cfg)
    v_tilde = x_tilde.copy()
    out_name = "x_tilde" if cfg.output == "x" else "v_tilde"
    trace = RunTrace(f"{method}-{cfg.output}", cfg.seed, out_name, metadata={
        "eta": eta, "m1": m1, "alpha": alpha, "mu": mu,
        "v_tilde_guaranteed": mu > 0,
    })
    rec = _make_recorder(problem, cfg, trace)
    want_v = cfg.output == "v"
    rec.record(0, 0, v_tilde if want_v else x_tilde)

    stage_x, stage_v, stage_evals = [x_tilde.copy()], [v_tilde.copy()], [0]
    budget = cfg.max_grad_evals
    evals, s, exhausted = 0, 0, False
    while not exhausted:
        if cfg.stages is not None and s >= cfg.stages:
            break
        if budget is not None and evals + n + per_step > budget:
            break
        s += 1
        if method == "svrda":
            est = SvrgAnchor(problem, x_tilde)
        else:
            est = SagaTable(problem, x_tilde, storage=cfg.saga_storage)
        evals += n
        state = StageState.start(x_tilde, v_tilde, alpha)
        for _ in range(stage_length(m1, s, mu)):
            if budget is not None and evals + per_step > budget:
                exhausted = True
                break
            if method == "svrda":
                i = sample_nonuniform(q, rng)
                svrda_inner_step(state, est, i, eta, problem, q)
            else:
                i = sample_uniform(n, rng)
                sada_inner_step(state, est, i, eta, problem)
            evals += per_step
            if rec.due(evals):
                rec.record(evals, s, state.v if want_v else state.x)
        x_tilde, v_tilde = state.x, state.v
        stage_x.append(x_tilde.copy())
        stage_v.append(v_tilde.copy())
        stage_evals.append(evals)
        rec.record(evals, s, v_tilde if want_v else x_tilde)

    trace.metadata["stages_completed"] = s
    return RunResult(x_tilde, v_tilde, trace, evals, stage_x, stage_v, stage_evals, out_name)


def svrda_run(problem, config=None):
    """Stochastic variance-reduced dual averaging.

    Each stage snapshots ``x0 = x_tilde_{s-1}`` (``n`` gradient evaluations),
    sets the dual anchor ``v0 = (1 - alpha) v_tilde_{s-1} + alpha x_tilde_{s-1}``
    and runs ``m_s`` inner steps with importance sampling ``q_i ~ L_i``.
    Stage lengths double when ``mu = 0``.

    Returns
    -------
    RunResult
        ``x_tilde`` is guaranteed for every ``mu``; ``v_tilde`` only for ``mu > 0``.
    """
    return _multistage(problem, config, "svrda")


def sada_run(problem, config=None):
    """Stochastic average dual averaging: as :func:`svrda_run` with a SAGA table
    refilled at ``x_tilde_{s-1}`` each stage and uniform sampling."""
    return _multistage(problem, config, "sada")


def _single_loop_steps(cfg, cost_per_step, init_cost=0):
    if cfg.iterations is not None:
        T = int(cfg.iterations)
        if cfg.max_grad_evals is not None:
            T = min(T, max(0, (cfg.max_grad_evals - init_cost) // cost_per_step))
        return T
    if cfg.max_grad_evals is None:
        raise ConfigError("set either iterations or max_grad_evals")
    return max(0, (cfg.max_grad_evals - init_cost) // cost_per_step)


def prox_gd_run(problem, config=None):
    """Proximal gradient descent with constant step ``1/eta`` (default ``eta = Lbar``)."""
    cfg = config or SolverConfig()
    n = problem.n
    eta = problem.lbar if cfg.eta is None else float(cfg.eta)
    T = _single_loop_steps(cfg, n)
    x = _start_point(problem, cfg)
    trace = RunTrace("prox-gd", cfg.seed, "last", metadata={"eta": eta})
    rec = _make_recorder(problem, cfg, trace)
    rec.record(0, 0, x)
    evals = 0
    for _ in range(T):
        x = problem.reg.prox(x - problem.grad(x) / eta, 1.0 / eta)
        evals += n
        if rec.due(evals):
            rec.record(evals, 0, x)
    rec.record(evals, 0, x)
    return RunResult(x, None, trace, evals, output_name="x_tilde")


def prox_sgd_run(problem, config=None):
    """Proximal SGD with a decreasing step.

    ``1/eta_t = 1/(eta0 + mu t)`` when ``mu > 0`` and ``1/(eta0 sqrt(t))``
    otherwise, with ``eta0 = Lmax`` by default.  The last iterate is returned.
    """
    cfg = config or SolverConfig()
    n, mu = problem.n, problem.mu
    eta0 = problem.lmax if cfg.eta is None else float(cfg.eta)
    T = _single_loop_steps(cfg, 1)
    rng = SeededRng(cfg.seed)
    x = _start_point(problem, cfg)
    trace = RunTrace("prox-sgd", cfg.seed, "last", metadata={"eta0": eta0})
    rec = _make_recorder(problem, cfg, trace)
    rec.record(0, 0, x)
    rows, reg = problem.rows, problem.reg
    for t in range(1, T + 1):
        i = sample_uniform(n, rng)
        step = 1.0 / (eta0 + mu * t) if mu > 0 else 1.0 / (eta0 * math.sqrt(t))
        y = x.copy()
        rows.axpy(i, -step * problem.sample_deriv(i, x), y)
        x = reg.prox(y, step)
        if rec.due(t):
            rec.record(t, 0, x)
    rec.record(T, 0, x)
    return RunResult(x, None, trace, T, output_name="x_tilde")


def rda_run(problem, config=None):
    """Regularized dual averaging on raw stochastic gradients.

    ``x_t = prox_{(t/eta_t) R}(x0 - (t/eta_t) gbar_t)`` with
    ``eta_t = gamma sqrt(t)`` and ``gamma = Lmax`` unless ``eta`` is given.
    """
    cfg = config or SolverConfig()
    n = problem.n
    gamma = problem.lmax if cfg.eta is None else float(cfg.eta)
    T = _single_loop_steps(cfg, 1)
    rng = SeededRng(cfg.seed)
    x0 = _start_point(problem, cfg)
    x = x0.copy()
    gbar = RunningAverage(problem.d)
    trace = RunTrace("rda", cfg.seed, "last", metadata={"gamma": gamma})
    rec = _make_recorder(problem, cfg, trace)
    rec.record(0, 0, x)
    for t in range(1, T + 1):
        i = sample_uniform(n, rng)
        gbar.push(problem.sample_grad(i, x))
        c = math.sqrt(t) / gamma
        x = problem.reg.prox(x0 - c * gbar.value, c)
        if rec.due(t):
            rec.record(t, 0, x)
    rec.record(T, 0, x)
    return RunResult(x, None, trace, T, output_name="x_tilde")


def svrg_run(problem, config=None):
    """Proximal SVRG with importance sampling; each stage outputs the average
    of its inner iterates (defaults ``eta = 4 Lbar``, ``m = 2n``)."""
    cfg = config or SolverConfig()
    _need_stopping_rule(cfg)
    n = problem.n
    eta = 4.0 * problem.lbar if cfg.eta is None else float(cfg.eta)
    m = 2 * n if cfg.m1 is None else int(cfg.m1)
    q = build_q(problem.lipschitz)
    rng = SeededRng(cfg.seed)
    x_tilde = _start_point(problem, cfg)
    trace = RunTrace("svrg", cfg.seed, "average", metadata={"eta": eta, "m": m})
    rec = _make_recorder(problem, cfg, trace)
    rec.record(0, 0, x_tilde)
    reg, h = problem.reg, 1.0 / eta
    budget = cfg.max_grad_evals
    stage_x, stage_evals = [x_tilde.copy()], [0]
    evals, s, exhausted = 0, 0, False
    while not exhausted:
        if cfg.stages is not None and s >= cfg.stages:
            break
        if budget is not None and evals + n + SVRG_EVALS_PER_STEP > budget:
            break
        s += 1
        anchor = SvrgAnchor(problem, x_tilde)
        evals += n
        x = x_tilde.copy()
        avg = RunningAverage(problem.d)
        for _ in range(m):
            if budget is not None and evals + SVRG_EVALS_PER_STEP > budget:
                exhausted = True
                break
            i = sample_nonuniform(q, rng)
            g = svrg_estimate(anchor, i, x, q.weights[i], problem)
            x = reg.prox(x - h * g, h)
            avg.push(x)
            evals += SVRG_EVALS_PER_STEP
            if rec.due(evals):
                rec.record(evals, s, avg.value)
        if avg.count:
            x_tilde = avg.value.copy()
        stage_x.append(x_tilde.copy())
        stage_evals.append(evals)
        rec.record(evals, s, x_tilde)
    return RunResult(x_tilde, None, trace, evals, stage_x, [], stage_evals, output_name="x_tilde")


def saga_run(problem, config=None):
    """Proximal SAGA with uniform sampling and step ``1/(3 Lmax)``.

    For ``mu > 0`` the last iterate is returned; for ``mu = 0`` the running
    average of all iterates ``x_1..x_T``, the point its guarantee covers.
    """
    cfg = config or SolverConfig()
    n, mu = problem.n, problem.mu
    step = 1.0 / (3.0 * problem.lmax) if cfg.step is None else float(cfg.step)
    T = _single_loop_steps(cfg, SAGA_EVALS_PER_STEP, init_cost=n)
    averaged = mu == 0
    rng = SeededRng(cfg.seed)
    x = _start_point(problem, cfg)
    trace = RunTrace("saga", cfg.seed, "average" if averaged else "last", metadata={"step": step})
    rec = _make_recorder(problem, cfg, trace)
    rec.record(0, 0, x)
    table = SagaTable(problem, x, storage=cfg.saga_storage)
    evals = n
    avg = RunningAverage(problem.d)
    reg = problem.reg
    for _ in range(T):
        i = sample_uniform(n, rng)
        g = saga_estimate_and_update(table, i, x, problem)
        x = reg.prox(x - step * g, step)
        avg.push(x)
        evals += SAGA_EVALS_PER_STEP
        if rec.due(evals):
            rec.record(evals, 0, avg.value if averaged else x)
    out = (avg.value.copy() if avg.count else x) if averaged else x
    rec.record(evals, 0, out)
    return RunResult(out, None, trace, evals, output_name="x_tilde")


SOLVERS = {
    "svrda": svrda_run,
    "sada": sada_run,
    "prox-gd": prox_gd_run,
    "prox-sgd": prox_sgd_run,
    "rda": rda_run,
    "svrg": svrg_run,
    "saga": saga_run,
}
