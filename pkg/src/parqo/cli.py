"""Command-line interface.

Exit codes: 0 success, 1 self-test failure, 2 configuration or I/O error,
3 numerical failure (singular system or constraint violation).
"""
import argparse
import logging
import math
import sys

from . import __version__, kernels
from .errors import ConfigError, SingularSystemError
from .harness import ExperimentConfig, emit_results, run_experiment

log = logging.getLogger("parqo")

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _algorithms(text):
    return tuple(a for a in text.split(",") if a.strip())


def _positive_float(text):
    v = float(text)
    if not v > 0 or math.isinf(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _common(p, iters, trials, bound_iters_help):
    p.add_argument("--alg", type=_algorithms, default=("lplq:4:2", "lplq:2:1", "linf"),
                   help="comma-separated list of lplq:P:Q and linf (default: all three)")
    p.add_argument("--iters", type=int, default=iters, help=f"iterations per run (default {iters})")
    p.add_argument("--trials", type=int, default=trials,
                   help=f"Monte-Carlo trials (default {trials})")
    p.add_argument("--seed", type=int, default=1, help="64-bit base seed (default 1)")
    p.add_argument("--percentile", type=float, default=99.0,
                   help="reported percentile, nearest-rank (default 99)")
    p.add_argument("--tau", type=_positive_float, default=None,
                   help="fixed FBS step size (default: probed)")
    p.add_argument("--bound-iters", type=int, default=None, help=bound_iters_help)
    p.add_argument("--workers", type=int, default=1, help="parallel trial workers (default 1)")
    p.add_argument("--out", default="-", help="output file, '-' for stdout (default)")
    p.add_argument("--format", choices=("csv", "json"), default=None,
                   help="output format (default: from the file extension, else csv)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="parqo",
        description="Minimum-PAR solvers and MU-MIMO-OFDM PAR reduction experiments.")
    parser.add_argument("--version", action="version", version=f"parqo {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gaussian", help="random complex Gaussian M x N systems")
    g.add_argument("--m", type=int, default=100, help="rows of A (default 100)")
    g.add_argument("--n", type=int, default=200, help="columns of A (default 200)")
    g.add_argument("--stop-objective", type=_positive_float, default=None,
                   help="stop FBS once the objective drops below this value")
    _common(g, 1_000_000, 1, "DRS iterations for the trade-off constant (default 100000)")

    m = sub.add_parser("mimo", help="joint precoding and PAR reduction, MU-MIMO-OFDM")
    m.add_argument("--b", type=int, default=128, help="base-station antennas (default 128)")
    m.add_argument("--u", type=int, default=16, help="users (default 16)")
    m.add_argument("--w", type=int, default=2048, help="OFDM tones (default 2048)")
    m.add_argument("--taps", type=int, default=4, help="channel taps (default 4)")
    m.add_argument("--plan", default="lte20", help="tone plan profile (default lte20)")
    m.add_argument("--bound-trials", type=int, default=1,
                   help="trials used for the trade-off constant (default 1, 0 disables)")
    m.add_argument("--unit-tap-variance", action="store_true",
                   help="draw each tap as CN(0, 1) instead of CN(0, 1/L)")
    _common(m, 20, 100, "DRS iterations for the trade-off constant (default 200)")

    st = sub.add_parser("selftest", help="run the invariant checks")
    st.add_argument("--seed", type=int, default=0)
    return parser


def _config(args):
    common = dict(algorithms=args.alg, k_max=args.iters, trials=args.trials, seed=args.seed,
                  percentile=args.percentile, workers=args.workers, tau=args.tau,
                  bound_iters=args.bound_iters)
    if args.command == "gaussian":
        return ExperimentConfig(kind="gaussian", M=args.m, N=args.n,
                                stop_objective=args.stop_objective, **common)
    return ExperimentConfig(kind="mimo", B=args.b, U=args.u, W=args.w, L=args.taps,
                            plan_profile=args.plan, bound_trials=args.bound_trials,
                            unit_tap_variance=args.unit_tap_variance, **common)


def _format(args):
    if args.format:
        return args.format
    return "json" if args.out.lower().endswith(".json") else "csv"


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.command == "selftest":
        from . import selftest
        return EXIT_SELFTEST if selftest.run(args.seed) else EXIT_OK
    try:
        cfg = _config(args)
        log.info("running %s experiment (%d trials, kernels: %s)", cfg.kind, cfg.trials,
                 kernels.BACKEND)
        curve = run_experiment(cfg)
        for key, value in curve.diagnostics.items():
            log.info("%s: %s", key, value)
        out = "/dev/stdout" if args.out == "-" else args.out
        emit_results(curve, out, _format(args))
    except ConfigError as exc:
        print(f"parqo: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"parqo: {exc.strerror}: {exc.filename}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularSystemError, ArithmeticError) as exc:
        print(f"parqo: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
