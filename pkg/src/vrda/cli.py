"""bench command line: run solver grids, generate synthetic data, solve references."""
import argparse
import dataclasses
import json
import sys

import numpy as np

from .bench import ExperimentConfig, build_problem, compute_reference, run_experiment
from .data import SyntheticSpec, dump_libsvm, generate_synthetic
from .trace import nnz


def _cmd_run(args):
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.budget is not None:
        cfg.budget = args.budget
    if args.checkpoint_every is not None:
        cfg.checkpoint_every = args.checkpoint_every
    if args.nnz_threshold is not None:
        cfg.nnz_threshold = args.nnz_threshold
    cfg.__post_init__()
    res = run_experiment(cfg, out_dir=args.out_dir, workers=args.threads)
    for run in res.manifest["runs"]:
        if run["status"] == "ok":
            print(f"{run['solver']:>10s} seed={run['seed']:<4d} evals={run['total_grad_evals']:<9d} "
                  f"gap={run['final_objective_gap']:.3e} nnz={run['final_nnz']}")
        else:
            print(f"{run['solver']:>10s} seed={run['seed']:<4d} FAILED {run['error']}", file=sys.stderr)
    return 0 if res.ok else 1


def _cmd_synth(args):
    spec = SyntheticSpec(n=args.n, d=args.d, k=args.k, noise_std=args.noise,
                         label_kind=args.label_kind, seed=args.seed)
    ds, x_true = generate_synthetic(spec)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        dump_libsvm(ds, fh)
    with open(args.out + ".truth.json", "w", encoding="utf-8") as fh:
        json.dump({"spec": dataclasses.asdict(spec), "x_true": x_true.tolist()}, fh, indent=2)
    print(f"wrote {args.out} (n={spec.n}, d={spec.d}, k={spec.k})")
    return 0


def _cmd_reference(args):
    cfg = ExperimentConfig(solvers=["prox-gd"], data=args.data, loss=args.loss, l1=args.l1, l2=args.l2,
                           normalize=args.normalize, reference_tol=args.tol)
    problem = build_problem(cfg)
    x_star, p_star = compute_reference(problem, tol=args.tol)
    out = {"p_star": p_star, "nnz": nnz(x_star), "tol": args.tol, "n": problem.n, "d": problem.d,
           "x_star": np.asarray(x_star).tolist()}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")
    print(f"p_star={p_star!r} nnz={out['nnz']}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="bench", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a solver/seed grid from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--budget", type=int, help="gradient evaluations per run")
    r.add_argument("--checkpoint-every", type=int)
    r.add_argument("--out-dir", default="bench_out")
    r.add_argument("--nnz-threshold", type=float)
    r.add_argument("--threads", type=int, help="parallel runs (default: $VRDA_BENCH_THREADS or 1)")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("synth", help="write a synthetic sparse problem in libsvm format")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--label-kind", choices=["regression", "binary"], default="regression")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_synth)

    f = sub.add_parser("reference", help="solve a problem to high precision")
    f.add_argument("--data", required=True)
    f.add_argument("--loss", choices=["squared", "logistic"], default="logistic")
    f.add_argument("--l1", type=float, default=0.0)
    f.add_argument("--l2", type=float, default=0.0)
    f.add_argument("--tol", type=float, default=1e-10)
    f.add_argument("--normalize", action="store_true")
    f.add_argument("--out", required=True)
    f.set_defaults(func=_cmd_reference)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
