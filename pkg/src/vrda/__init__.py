"""Variance-reduced dual averaging for sparse regularized empirical risk minimization."""
from .bench import ExperimentConfig, compute_reference, objective_gap, run_experiment
from .data import (
    Dataset,
    SyntheticSpec,
    dump_libsvm,
    generate_synthetic,
    load_libsvm,
    normalize_features,
    parse_libsvm,
)
from .estimators import RunningAverage, SagaTable, SvrgAnchor
from .optimizers import (
    ConfigError,
    RunResult,
    SolverConfig,
    prox_gd_run,
    prox_sgd_run,
    rda_run,
    sada_run,
    saga_run,
    svrda_run,
    svrg_run,
)
from .problem import CompositeProblem, Logistic, Regularizer, Sample, SquaredError
from .sampling import SeededRng, build_q
from .trace import RunTrace, nnz

__version__ = "0.1.0"
