"""Command line front end.

Four subcommands:

    standardize <matrix-file>      equal-row-norm standardization diagnostic
    solve                          recover a signal from saved measurements
    oracle enumerate               brute-force solution enumeration
    experiment <name>              run one of the canned studies

Exit codes: 0 on success, 1 when a solver fails to converge and --strict
was given, 2 on malformed input (the message names the offending field or
file).  All structured output is JSON on stdout; diagnostics go to stderr.
"""

import argparse
import json
import sys

import numpy as np

from .experiments import EXPERIMENT_NAMES, ExperimentSpec, run_experiment
from .factored import (
    SpectralInitConfig,
    recovery_error,
    run_rankr_adm,
    spectral_init,
)
from .frames import (
    ConvergenceError,
    equal_norm_standardize,
    load_frame_txt,
    load_measurement_json,
    qr_standardize,
)
from .lifted import feasibility_pocs, lifted_adm, matched_beta
from .oracle import enumerate_solutions
from . import reporting

__all__ = ["cli_main", "main", "build_parser"]


def _emit(doc, path=None):
    text = json.dumps(reporting.jsonify(doc), indent=1, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _int_list(text, field):
    try:
        vals = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValueError("%s: expected comma separated integers, got %r" % (field, text))
    if not vals:
        raise ValueError("%s: empty list" % field)
    return vals


# ---------------------------------------------------------------------------
# standardize


def _cmd_standardize(args):
    frame = load_frame_txt(args.matrix)
    res = equal_norm_standardize(frame, tol=args.tol, max_iter=args.max_iter)
    if args.json:
        _emit(
            {
                "matrix": args.matrix,
                "N": frame.N,
                "n": frame.n,
                "iterations": res.iterations,
                "diag_deviation": res.diag_deviation,
                "D": res.D,
            }
        )
    else:
        # contract: the printed number is max_i |(Q Q^H)_ii - n/N|
        print("%.12e" % res.diag_deviation)
    return 0


# ---------------------------------------------------------------------------
# solve


def _solve_lifted(A, b, args, pocs):
    b_sq = b * b
    kw = {
        "max_iter": args.max_iter if args.max_iter is not None else 2000,
        "tol": args.tol if args.tol is not None else 1e-9,
    }
    if pocs:
        rep = feasibility_pocs(A, b_sq, **kw)
    else:
        beta = args.beta if args.beta is not None else matched_beta(b_sq)
        rep = lifted_adm(A, b_sq, beta=beta, **kw)
    x = np.sqrt(max(rep.sigma1, 0.0)) * rep.v1
    return x, rep.converged, rep.iterations, float(rep.residual_trace[-1])


def _solve_factored(A, b, args):
    Q, R = qr_standardize(A)
    beta = args.beta if args.beta is not None else 0.01
    gamma = args.gamma if args.gamma is not None else 0.01
    kw = {
        "beta": beta,
        "gamma": gamma,
        "max_iter": args.max_iter if args.max_iter is not None else 5000,
        "tol": args.tol if args.tol is not None else 1e-8,
    }
    if args.init == "spectral":
        x_min, _ = spectral_init(Q.entries, b, SpectralInitConfig())
        mag = np.abs(Q.entries @ x_min)
        c = float(mag @ b) / max(float(mag @ mag), 1e-300)
        y0 = np.zeros((Q.n, args.r), dtype=x_min.dtype)
        y0[:, 0] = c * x_min
        if args.r > 1:
            rng = np.random.default_rng(args.seed)
            y0[:, 1:] = 0.01 * abs(c) * rng.standard_normal((Q.n, args.r - 1))
        res = run_rankr_adm(Q, b, args.r, y0=y0, **kw)
    else:
        res = run_rankr_adm(Q, b, args.r, seed=args.seed, **kw)
    x = np.linalg.solve(R, res.x)
    return x, res.converged, res.iterations, float(res.residual_trace[-1])


def _cmd_solve(args):
    frame = load_frame_txt(args.frame)
    meas = load_measurement_json(args.measurements)
    A = frame.entries
    if meas.b.shape[0] != frame.N:
        raise ValueError(
            "measurements: %d magnitudes for a frame with %d rows"
            % (meas.b.shape[0], frame.N)
        )
    if args.method == "adm":
        x, converged, iterations, residual = _solve_factored(A, meas.b, args)
    else:
        if args.init == "spectral":
            print("note: --init is only used by --method adm", file=sys.stderr)
        x, converged, iterations, residual = _solve_lifted(
            frame, meas.b, args, pocs=args.method == "pocs"
        )
    doc = {
        "method": args.method,
        "N": frame.N,
        "n": frame.n,
        "converged": bool(converged),
        "iterations": int(iterations),
        "residual": residual,
        "x": x,
    }
    if meas.ground_truth is not None:
        doc["recovery_error"] = float(recovery_error(x, meas.ground_truth))
    _emit(doc, args.output)
    if args.strict and not converged:
        print("error: solver did not converge", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# oracle


def _cmd_oracle(args):
    frame = load_frame_txt(args.frame)
    meas = load_measurement_json(args.measurements)
    sols = enumerate_solutions(
        frame.entries, meas.b, residual_tol=args.residual_tol, budget=args.budget
    )
    doc = sols.to_json()
    doc["count"] = len(sols)
    if meas.ground_truth is not None and len(sols):
        errs = [float(recovery_error(s, meas.ground_truth)) for s in sols.solutions]
        doc["best_recovery_error"] = min(errs)
    _emit(doc, args.output)
    return 0


# ---------------------------------------------------------------------------
# experiment


def _cmd_experiment(args):
    doc = {}
    if args.config:
        with open(args.config) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError("config: not valid JSON (%s)" % exc)
        if not isinstance(doc, dict):
            raise ValueError("config: expected a JSON object")
        if doc.setdefault("experiment", args.name) != args.name:
            raise ValueError(
                "experiment: config says %r but the command line says %r"
                % (doc["experiment"], args.name)
            )
    else:
        doc["experiment"] = args.name
    overrides = {
        "trials": args.trials,
        "n_values": _int_list(args.n, "n_values") if args.n else None,
        "r": _int_list(args.r, "r") if args.r else None,
        "seed": args.seed,
        "beta": args.beta,
        "gamma": args.gamma,
        "max_iter": args.max_iter,
        "tol": args.tol,
        "workers": args.workers,
        "output_dir": args.output_dir,
        "snr_db": args.snr_db,
        "snr_convention": args.snr_convention,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    spec = ExperimentSpec.from_json(doc)
    report = run_experiment(spec)
    _emit(
        {
            "experiment": report.experiment,
            "output_dir": spec.output_dir,
            "wall_time_s": report.wall_time_s,
            "summary": report.summary,
            "artifacts": report.artifacts,
        }
    )
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="phaserank",
        description="Phase retrieval solvers and reproducible experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "standardize",
        help="equal-row-norm standardization; prints max |diag(QQ^H) - n/N|",
    )
    p.add_argument("matrix", help="frame file written by save_frame_txt")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--json", action="store_true", help="emit the full result as JSON")
    p.set_defaults(func=_cmd_standardize)

    p = sub.add_parser("solve", help="recover a signal from saved measurements")
    p.add_argument("--frame", required=True, help="frame file (save_frame_txt format)")
    p.add_argument(
        "--measurements", required=True, help="measurement JSON (save_measurement_json)"
    )
    p.add_argument("--method", choices=("pocs", "lifted", "adm"), default="adm")
    p.add_argument("--r", type=int, default=1, help="factor rank for --method adm")
    p.add_argument("--init", choices=("random", "spectral"), default="random")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true", help="exit 1 if not converged")
    p.add_argument("--output", default=None, help="also write the JSON report here")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("oracle", help="brute-force ground truth tools")
    oracle_sub = p.add_subparsers(dest="oracle_command", required=True)
    pe = oracle_sub.add_parser(
        "enumerate", help="enumerate all sign-consistent solutions of |Ax| = b"
    )
    pe.add_argument("--frame", required=True)
    pe.add_argument("--measurements", required=True)
    pe.add_argument("--residual-tol", type=float, default=1e-8)
    pe.add_argument("--budget", type=int, default=22)
    pe.add_argument("--output", default=None)
    pe.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("experiment", help="run a canned study and write its report")
    p.add_argument("name", choices=EXPERIMENT_NAMES)
    p.add_argument("--config", default=None, help="ExperimentSpec JSON file")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--n", default=None, help="comma separated problem sizes")
    p.add_argument("--r", default=None, help="comma separated factor ranks")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--snr-convention", choices=("paper", "squared"), default=None)
    p.set_defaults(func=_cmd_experiment)

    return parser


def cli_main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


main = cli_main


if __name__ == "__main__":
    sys.exit(main())
