"""Command-line entry point: ``advslam {run,sweep,baseline,plotdata,synth}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 anything else.
``ADVSLAM_VERBOSITY`` (DEBUG, INFO, WARNING, ...) sets the log level only.
"""

import argparse
import logging
import os
import sys

from . import experiment
from .errors import ConfigError, DataError, StageError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_OTHER = 0, 1, 2, 3

log = logging.getLogger("advslam")


def _parser():
    p = argparse.ArgumentParser(prog="advslam", description="Adversarial perturbations against RGB-D odometry.")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="attack run described by a config file")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="report directory (overrides [output] dir)")

    b = sub.add_parser("baseline", help="attack-free run of the same config")
    b.add_argument("config")
    b.add_argument("-o", "--output")

    s = sub.add_parser("sweep", help="epsilon x schedule grid sharing one baseline")
    s.add_argument("config")
    s.add_argument("--eps", type=float, nargs="+", required=True)
    s.add_argument("--schedules", nargs="+", default=["all"])
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("-o", "--output")

    d = sub.add_parser("plotdata", help="plot-ready CSVs from a report directory")
    d.add_argument("report")
    d.add_argument("--kind", choices=("trajectory2d", "timeline"), required=True)
    d.add_argument("-o", "--output")

    y = sub.add_parser("synth", help="write a synthetic sequence as a TUM-style directory")
    y.add_argument("spec", help="config file; its [dataset] section describes the sequence")
    y.add_argument("-o", "--output", required=True)
    return p


def _dispatch(args):
    if args.verb == "plotdata":
        if not os.path.isdir(args.report):
            raise DataError(f"no report directory at {args.report}")
        for path in experiment.emit_plot_data(args.report, args.kind, args.output):
            print(path)
        return
    cfg = experiment.load_config(args.spec if args.verb == "synth" else args.config)
    if args.verb == "synth":
        if cfg.dataset.source != "synthetic":
            raise ConfigError("synth needs a synthetic [dataset] section")
        print(experiment.export_synthetic(cfg, args.output))
        return
    out = args.output or cfg.output
    if args.verb == "run":
        report = experiment.run(cfg, out)
    elif args.verb == "baseline":
        report = experiment.run_baseline(cfg, out)
    else:
        experiment.sweep(cfg, args.eps, args.schedules, out, jobs=args.jobs)
        print(out)
        return
    s = report.summary()
    print(f"ate_mean={s['ate_mean']:.6f} untracked_fraction={s['untracked_fraction']:.4f} -> {out}")


def exit_code(exc):
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    return EXIT_OTHER


def main(argv=None):
    logging.basicConfig(level=os.environ.get("ADVSLAM_VERBOSITY", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        # argparse usage errors are configuration errors
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        _dispatch(args)
    except Exception as exc:
        print(f"advslam: error: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
