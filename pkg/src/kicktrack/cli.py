"""Command-line entry point: ``kicktrack simulate | evaluate | table | batch``.

Exit codes:
    0  success
    2  usage error (argparse)
    3  unreadable or malformed input (config, trajectory, log, rows file)
    4  simulation diverged (a partial log is still written)
    5  invalid parameters or a log that cannot be evaluated
    6  output could not be written
"""

import argparse
import sys
from pathlib import Path

from kicktrack import report, simharness
from kicktrack.errors import DivergedSimulation, KicktrackError, ParseError

EXIT_OK = 0
EXIT_PARSE = 3
EXIT_DIVERGED = 4
EXIT_INVALID = 5
EXIT_IO = 6


def _fail(message, code):
    print(f"kicktrack: error: {message}", file=sys.stderr)
    return code


def cmd_simulate(args):
    try:
        config = simharness.load_config(args.config)
        log = simharness.run_tracking_sim(config)
    except ParseError as exc:
        return _fail(exc, EXIT_PARSE)
    except DivergedSimulation as exc:
        try:
            simharness.write_flight_log(exc.log, args.out)
        except OSError as io_exc:
            return _fail(f"{exc}; could not write partial log: {io_exc}", EXIT_IO)
        return _fail(f"simulation diverged: {exc} (partial log written to {args.out})", EXIT_DIVERGED)
    except (KicktrackError, ValueError) as exc:
        return _fail(exc, EXIT_INVALID)
    try:
        simharness.write_flight_log(log, args.out)
    except OSError as exc:
        return _fail(exc, EXIT_IO)
    return EXIT_OK


def cmd_evaluate(args):
    try:
        if args.dtw_artifacts:
            Path(args.dtw_artifacts).mkdir(parents=True, exist_ok=True)
        rows = report.evaluate_logs(
            args.logs, normalize=args.normalize, artifacts_dir=args.dtw_artifacts, workers=args.workers
        )
    except ParseError as exc:
        return _fail(exc, EXIT_PARSE)
    except OSError as exc:
        return _fail(exc, EXIT_IO)
    except (KicktrackError, ValueError, KeyError) as exc:
        return _fail(exc, EXIT_INVALID)
    try:
        report.write_rows_csv(rows, args.out)
    except OSError as exc:
        return _fail(exc, EXIT_IO)
    return EXIT_OK


def cmd_table(args):
    try:
        rows = report.read_rows_csv(args.rows)
        text = report.render_table(rows)
    except ParseError as exc:
        return _fail(exc, EXIT_PARSE)
    except KicktrackError as exc:
        return _fail(exc, EXIT_INVALID)
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            return _fail(exc, EXIT_IO)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_batch(args):
    try:
        statuses = simharness.run_batch(args.config_dir, args.out_dir, workers=args.workers)
    except ParseError as exc:
        return _fail(exc, EXIT_PARSE)
    except (KicktrackError, ValueError) as exc:
        return _fail(exc, EXIT_INVALID)
    for stem, status in statuses.items():
        print(f"{stem}\t{status}")
    return EXIT_DIVERGED if any(s != "ok" for s in statuses.values()) else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kicktrack",
        description="Simulate quadrotor tracking of limb trajectories and score it with MSE and DTW.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one experiment config and write its flight log")
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", required=True, help="flight log CSV to write")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="score flight logs; writes evaluation rows CSV")
    p.add_argument("logs", nargs="+", help="flight log CSV files")
    p.add_argument("--out", required=True, help="evaluation rows CSV to write")
    p.add_argument("--dtw-artifacts", metavar="DIR", help="write DTW matrix/path/segment files here")
    p.add_argument("--normalize", action="store_true", help="divide DTW distance by path length")
    p.add_argument("--workers", type=int, default=1, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("table", help="render evaluation rows as result tables")
    p.add_argument("rows", help="evaluation rows CSV")
    p.add_argument("--out", help="write the table here instead of stdout")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("batch", help="simulate every config in a directory")
    p.add_argument("config_dir")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
