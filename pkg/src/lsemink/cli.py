"""Command-line front end.

``lsemink run``     builds a problem, runs the requested solvers under a
                    work budget, and writes trace CSVs plus summary.json.
``lsemink report``  renders convergence figures and a comparison table
                    from a previously written experiment directory.

Exit code 0 means every requested solver ran (whether or not it
converged); configuration and I/O problems exit nonzero.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, IdxFormatError
from .harness import DEFAULT_BUDGETS, PROBLEMS, SOLVERS, ExperimentSpec, run_experiment
from .report import render_report


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lsemink",
        description="Matrix-free log-sum-exp minimization experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run solvers on a generated problem")
    run_p.add_argument("--problem", required=True, choices=PROBLEMS)
    run_p.add_argument(
        "--solver",
        action="append",
        choices=sorted(SOLVERS),
        help="repeatable; defaults to all solvers",
    )
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--seed", type=int, default=0)
    # smoothed-max parameters
    run_p.add_argument("--eta", type=float, default=1e-1, help="smoothing parameter")
    run_p.add_argument("--m", type=int, default=100, help="rows of the model")
    run_p.add_argument("--n", type=int, default=20, help="unknowns of the model")
    # classification parameters
    run_p.add_argument("--num-data", type=int, default=100)
    run_p.add_argument("--classes", type=int, default=10)
    run_p.add_argument("--feat-dim", type=int, default=784)
    run_p.add_argument("--rfm-dim", type=int, default=1000)
    run_p.add_argument("--alpha", type=float, default=0.0, help="Tikhonov coefficient")
    run_p.add_argument("--mnist-images", default=None)
    run_p.add_argument("--mnist-labels", default=None)
    # solver settings
    run_p.add_argument("--gtol", type=float, default=1e-14)
    run_p.add_argument("--xtol", type=float, default=1e-10)
    run_p.add_argument(
        "--max-work",
        type=int,
        default=None,
        help=f"work budget in sweeps over the terms (default {DEFAULT_BUDGETS})",
    )
    run_p.add_argument("--ktol", type=float, default=1e-3)
    run_p.add_argument("--kmaxiter", type=int, default=20)
    run_p.add_argument("--gamma", type=float, default=1e-4)
    run_p.add_argument("--beta0", type=float, default=1.0)
    run_p.add_argument("--plots", action="store_true", help="also render the report")

    rep_p = sub.add_parser("report", help="render figures and a table from traces")
    rep_p.add_argument("--out", required=True, help="experiment directory to read")
    return parser


def _spec_from_args(args) -> ExperimentSpec:
    return ExperimentSpec(
        problem=args.problem,
        solvers=tuple(args.solver) if args.solver else tuple(SOLVERS),
        out_dir=args.out,
        seed=args.seed,
        eta=args.eta,
        m=args.m,
        n=args.n,
        num_data=args.num_data,
        num_classes=args.classes,
        feature_dim=args.feat_dim,
        rfm_dim=args.rfm_dim,
        alpha=args.alpha,
        mnist_images=args.mnist_images,
        mnist_labels=args.mnist_labels,
        gtol=args.gtol,
        xtol=args.xtol,
        max_work_units=args.max_work,
        ktol=args.ktol,
        kmaxiter=args.kmaxiter,
        gamma=args.gamma,
        beta0=args.beta0,
    )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            summary = run_experiment(_spec_from_args(args))
            for name, res in summary.results.items():
                if res.error:
                    line = f"{name}: {res.status} ({res.error})"
                else:
                    line = (
                        f"{name}: {res.status} f={res.final_f:.6e} "
                        f"gnorm={res.final_gnorm:.6e} work={res.work_sweeps:g}"
                    )
                print(line)
            if args.plots:
                for path in render_report(args.out):
                    print(f"wrote {path}")
        else:
            for path in render_report(args.out):
                print(f"wrote {path}")
    except (ConfigError, IdxFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
