"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import analysis, bayes, fileio, harness
from .baselines import STRATEGIES, select
from .embedding import ClassProbabilities, EmbeddingPool
from .errors import ConfigError, DimensionError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def cmd_select(args):
    X = fileio.read_matrix(args.embeddings)
    if args.projection_dim:
        X = harness.random_projection(X, args.projection_dim, args.projection_seed).data
    pool = EmbeddingPool(X)
    probs = None
    if args.probs:
        probs = ClassProbabilities(fileio.read_matrix(args.probs))
    elif args.mode == "classification" and args.strategy not in ("coreset", "random"):
        raise ConfigError(f"strategy {args.strategy!r} in classification mode needs --probs")
    labeled = fileio.read_ids(args.labeled) if args.labeled else []
    ids = select(args.strategy, pool, probs, labeled, args.batch_size, lam=args.lam,
                 mode=args.mode, seed=args.seed)
    sys.stdout.write(fileio.format_ids(ids))


def cmd_simulate(args):
    cfg = harness.load_config(args.config)
    if args.out_dir:
        cfg.out_dir = args.out_dir
    records = harness.run_experiment(cfg, jobs=args.jobs)
    print(f"wrote {len(records)} runs to {cfg.out_dir}", file=sys.stderr)


def cmd_bayes_sim(args):
    rows, *_ = bayes.risk_curves(args.kind, d=args.d, b_max=args.b_max, lam=args.lam,
                                 sigma2=args.sigma2, n=args.n, seed=args.seed)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["B", "strategy", "bayes_risk"])
        for B, name, risk in rows:
            w.writerow([B, name, repr(risk)])
    finally:
        if args.out:
            out.close()


def _collect_run_files(paths):
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            combined = p / "runs.csv"
            files.append(combined if combined.exists() else None)
            if files[-1] is None:
                files.pop()
                files.extend(sorted(p.glob("runs_*.csv")))
        else:
            files.append(p)
    if not files:
        raise ConfigError("no run CSVs found")
    return files


def cmd_analyze(args):
    higher = args.metric == "accuracy"
    total = None
    names = None
    # each positional argument is one experiment; penalties add up across experiments
    for exp in args.runs:
        records = []
        for f in _collect_run_files([exp]):
            records.extend(harness.read_records(f))
        random_runs = [r for r in records if r.strategy == "random"]
        if not random_runs:
            raise ConfigError(f"{exp}: analysis needs runs of the 'random' strategy")
        budgets = analysis.checkpoint_budgets(random_runs, args.batch_size, args.seed_size,
                                              tol=args.tol, higher_is_better=higher)
        strategies = names or sorted({r.strategy for r in records})
        names, P, _ = analysis.pairwise_penalty(records, budgets, strategies, args.threshold, higher)
        total = P if total is None else total + P
    means = analysis.column_means(total)
    if args.out:
        analysis.write_penalty(args.out, names, total, means)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["strategy"] + names)
        for name, row in zip(names, total):
            w.writerow([name] + [repr(float(v)) for v in row])
        w.writerow(["mean"] + [repr(float(v)) for v in means])


def cmd_project(args):
    X = fileio.read_matrix(args.input)
    Y = harness.random_projection(X, args.dim, args.seed, orthogonalize=args.orthogonalize).data
    fileio.write_f32(args.output, Y)


def build_parser():
    p = _Parser(prog="bait", description="Fisher-information batch active learning")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("select", help="select one batch and print ids")
    s.add_argument("--embeddings", required=True, help="BAIT-F32 or CSV pool embeddings")
    s.add_argument("--probs", help="BAIT-F32 or CSV class probabilities (classification)")
    s.add_argument("--labeled", help="file of already labeled ids, one per line")
    s.add_argument("--strategy", default="bait", choices=STRATEGIES)
    s.add_argument("--batch-size", "-B", type=int, required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=1.0)
    s.add_argument("--mode", choices=("classification", "regression"), default="classification")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--projection-dim", type=int, default=0)
    s.add_argument("--projection-seed", type=int, default=0)
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("simulate", help="run a pool-based simulation from a config file")
    s.add_argument("config")
    s.add_argument("--out-dir")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("bayes-sim", help="Bayes risk vs batch size for trace-fisher and log-det")
    s.add_argument("--kind", choices=bayes.SYNTH_KINDS, default="gaussian-decay")
    s.add_argument("--d", type=int, default=100)
    s.add_argument("--b-max", type=int, default=100)
    s.add_argument("--lambda", dest="lam", type=float, default=1.0)
    s.add_argument("--sigma2", type=float, default=1.0)
    s.add_argument("--n", type=int, default=None, help="pool size (default depends on kind)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_bayes_sim)

    s = sub.add_parser("analyze", help="pairwise penalty matrix from run CSVs")
    s.add_argument("runs", nargs="+", help="run CSVs or output directories, one per experiment")
    s.add_argument("--batch-size", "-B", type=int, required=True)
    s.add_argument("--seed-size", type=int, default=100)
    s.add_argument("--metric", choices=("accuracy", "mse"), default="accuracy")
    s.add_argument("--tol", type=float, default=0.01)
    s.add_argument("--threshold", type=float, default=analysis.T_THRESHOLD)
    s.add_argument("--out")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("project", help="random Gaussian projection to a new BAIT-F32 file")
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--dim", type=int, default=128)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--orthogonalize", action="store_true")
    s.set_defaults(func=cmd_project)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, DimensionError, FileNotFoundError) as exc:
        print(f"bait: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"bait: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
