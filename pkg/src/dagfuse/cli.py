"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 solver did not converge,
3 contract violation (including a failed verification suite).
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import io
from .asymptotics import LimitLawSpec, compare_laws, mc_finite_sample, mc_limit
from .distribution import CategoricalSample, smooth_histogram
from .errors import InputError, NotConverged, ProbabilityContractViolated
from .solver import PenaltyConfig, SolverConfig, solve, solve_path
from .verify import SUITES, run_suite

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_CONTRACT = 0, 1, 2, 3

log = logging.getLogger("dagfuse")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _solver_args(p):
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--tol", type=float, default=None, help="primal and dual tolerance")
    p.add_argument("--max-iters", type=int, default=None)


def _solver_cfg(args) -> SolverConfig:
    kw = {}
    if args.rho is not None:
        kw["rho"] = args.rho
    if args.tol is not None:
        kw["tol_primal"] = kw["tol_dual"] = args.tol
    if args.max_iters is not None:
        kw["max_iters"] = args.max_iters
    return SolverConfig(**kw)


def _graph_args(p):
    p.add_argument("--graph", required=True, help="graph file (.json or source,target CSV)")
    p.add_argument("--n-vertices", type=int, default=None, help="vertex count for CSV graphs")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dagfuse", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="fit one penalty pair")
    _graph_args(p)
    p.add_argument("--signal", required=True)
    p.add_argument("--lambda-f", type=float, default=0.0)
    p.add_argument("--lambda-ni", type=float, default=0.0)
    _solver_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("path", help="warm-started sweep over a penalty grid")
    _graph_args(p)
    p.add_argument("--signal", required=True)
    p.add_argument("--lambda-ni-grid", type=_floats, required=True)
    p.add_argument("--lambda-f-grid", type=_floats, default=[0.0])
    _solver_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("smooth", help="smooth the empirical pmf of categorical samples")
    _graph_args(p)
    p.add_argument("--samples", required=True)
    p.add_argument("--lambda-f", type=float, default=0.0)
    p.add_argument("--lambda-ni", type=float, default=0.0)
    _solver_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="finite-sample vs limit-law Monte Carlo")
    _graph_args(p)
    p.add_argument("--truth", required=True, help="true pmf as vertex,value CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--lambda-f0", type=float, default=0.0)
    p.add_argument("--lambda-ni0", type=float, default=0.0)
    p.add_argument(
        "--penalty-scaling",
        choices=["theorem", "matched"],
        default="theorem",
        help="theorem: lambda0*n^q; matched: lambda0/(2 n^q)",
    )
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1)
    _solver_args(p)
    p.add_argument("--out-finite", required=True)
    p.add_argument("--out-limit", required=True)
    p.add_argument("--report", required=True)

    p = sub.add_parser("verify", help="run a randomized property suite")
    p.add_argument("--suite", choices=SUITES, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    return parser


def _cmd_solve(args) -> int:
    dag = io.read_graph(args.graph, args.n_vertices)
    y = io.read_signal(args.signal, dag.n_vertices)
    pen = PenaltyConfig(args.lambda_f, args.lambda_ni)
    try:
        res = solve(y, dag, pen, _solver_cfg(args))
    except NotConverged as exc:
        io.write_json(args.out, exc.result.to_dict())
        log.error("%s", exc)
        return EXIT_NOT_CONVERGED
    io.write_json(args.out, res.to_dict())
    return EXIT_OK


def _cmd_path(args) -> int:
    dag = io.read_graph(args.graph, args.n_vertices)
    y = io.read_signal(args.signal, dag.n_vertices)
    cfg = _solver_cfg(args)
    header = ["lambda_f", "lambda_ni", "iterations", "objective"] + [f"beta_{v}" for v in range(dag.n_vertices)]
    code = EXIT_OK
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for lf in args.lambda_f_grid:
            pens = [PenaltyConfig(lf, lni) for lni in args.lambda_ni_grid]
            try:
                results = solve_path(y, dag, pens, cfg)
            except NotConverged as exc:
                log.error("lambda_f=%s: %s", lf, exc)
                return EXIT_NOT_CONVERGED
            for pen, res in zip(pens, results):
                w.writerow(
                    [io.fmt(pen.lambda_fused), io.fmt(pen.lambda_ni), res.iterations, io.fmt(res.objective)]
                    + [io.fmt(b) for b in res.beta]
                )
    return code


def _cmd_smooth(args) -> int:
    dag = io.read_graph(args.graph, args.n_vertices)
    sample = CategoricalSample(io.read_samples(args.samples))
    out = smooth_histogram(sample, dag, PenaltyConfig(args.lambda_f, args.lambda_ni), _solver_cfg(args))
    io.write_json(args.out, out.to_dict())
    return EXIT_OK


def _cmd_simulate(args) -> int:
    dag = io.read_graph(args.graph, args.n_vertices)
    p = io.read_signal(args.truth, dag.n_vertices)
    cfg = _solver_cfg(args)
    lambda0 = PenaltyConfig(args.lambda_f0, args.lambda_ni0)
    spec = LimitLawSpec(p, args.lambda_f0, args.lambda_ni0, args.q)
    finite = mc_finite_sample(
        p, dag, args.n, lambda0, args.q, args.reps, args.seed, cfg,
        scaling=args.penalty_scaling, threads=args.threads,
    )
    limit = mc_limit(p, spec, dag, args.reps, args.seed, cfg, threads=args.threads)
    io.write_law(args.out_finite, finite)
    io.write_law(args.out_limit, limit)
    report = compare_laws(finite, limit)
    report.update(
        {
            "seed": args.seed,
            "n": args.n,
            "reps": args.reps,
            "q": args.q,
            "lambda0": [args.lambda_f0, args.lambda_ni0],
            "penalty_scaling": args.penalty_scaling,
            "lambda_n": finite.meta["lambda_n"],
            "failures_finite": finite.meta["failures"],
            "failures_limit": limit.meta["failures"],
        }
    )
    io.write_json(args.report, report)
    return EXIT_OK


def _cmd_verify(args) -> int:
    report = run_suite(args.suite, args.seed)
    io.write_json(args.out, report)
    for name, c in report["checks"].items():
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {name}: worst={c['worst']:.3e} tol={c['tolerance']:g}")
    return EXIT_OK if report["pass"] else EXIT_CONTRACT


_COMMANDS = {
    "solve": _cmd_solve,
    "path": _cmd_path,
    "smooth": _cmd_smooth,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
}


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ProbabilityContractViolated as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
