"""Per-checkpoint records of a solver run."""
import csv
import io
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = ["TraceRow", "RunTrace", "Recorder", "nnz", "CSV_HEADER"]

CSV_HEADER = ("grad_evals", "stage", "objective_gap", "nnz", "wallclock_s")


def nnz(x, threshold=0.0):
    """Number of coordinates with ``|x_j| > threshold`` (exact nonzeros by default)."""
    x = np.asarray(x)
    if threshold == 0.0:
        return int(np.count_nonzero(x))
    return int(np.count_nonzero(np.abs(x) > threshold))


@dataclass(frozen=True)
class TraceRow:
    grad_evals: int
    stage: int
    objective_gap: float
    nnz: int
    wallclock_s: float


@dataclass
class RunTrace:
    """Checkpoints of one run.

    ``guaranteed_output`` names the iterate the metrics were taken on:
    ``"x_tilde"``, ``"v_tilde"``, ``"average"`` or ``"last"``.
    ``metadata`` carries solver settings and flags such as whether
    ``v_tilde`` has a convergence guarantee for this problem.
    """

    solver_id: str
    seed: int
    guaranteed_output: str
    rows: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self, fh=None):
        """Write the trace as CSV; returns the text when ``fh`` is None."""
        own = fh is None
        if own:
            fh = io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.grad_evals, r.stage, repr(float(r.objective_gap)), r.nnz, repr(float(r.wallclock_s))])
        if own:
            return fh.getvalue()


class Recorder:
    """Collects trace rows at stage ends and every ``every`` gradient evaluations.

    Objective evaluations done here are not counted as gradient work.
    ``p_star`` is subtracted from the objective; with ``p_star=0`` the
    column holds raw objective values.
    """

    def __init__(self, problem, trace, every=None, p_star=0.0, wallclock=False,
                 keep_iterates=False, nnz_threshold=0.0, gap_floor=None):
        self.problem = problem
        self.trace = trace
        self.every = every if every else problem.n
        self.p_star = p_star
        self.wallclock = wallclock
        self.keep = keep_iterates
        self.nnz_threshold = nnz_threshold
        self.gap_floor = gap_floor
        self._next = 0
        self._t0 = time.perf_counter()

    def due(self, evals):
        return evals >= self._next

    def record(self, evals, stage, point):
        rows = self.trace.rows
        if rows and evals <= rows[-1].grad_evals:
            return
        gap = self.problem.value(point) - self.p_star
        if self.gap_floor is not None and gap < self.gap_floor:
            warnings.warn(f"objective gap {gap:.3e} below {self.gap_floor:.3e}; reference solution is too loose",
                          RuntimeWarning, stacklevel=2)
            gap = self.gap_floor
        elapsed = time.perf_counter() - self._t0 if self.wallclock else 0.0
        rows.append(TraceRow(int(evals), int(stage), float(gap), nnz(point, self.nnz_threshold), elapsed))
        if self.keep:
            self.trace.iterates.append(np.array(point, copy=True))
        while self._next <= evals:
            self._next += self.every

    def maybe(self, evals, stage, point_fn):
        if evals >= self._next:
            self.record(evals, stage, point_fn())
