"""Command line entry point: ``strongld <command> [--config FILE | --preset TAG] ...``.

Exit status is 0 on success, 1 on a fatal error and 2 when the run finished
but some nodes or rungs did not converge.
"""
import argparse
from dataclasses import replace
import logging
import sys

from . import __version__
from .config import ConfigError, ExperimentConfig, config_from_preset, load_config
from .errors import StrongLDError
from .experiments import run_action, run_compare, run_compare_stochastic, run_sweep, run_wiener_gen
from .presets import format_table

log = logging.getLogger("strongld")

EXIT_OK, EXIT_FATAL, EXIT_UNCONVERGED = 0, 1, 2

RUNNERS = {
    "compare": run_compare,
    "compare-stochastic": run_compare_stochastic,
    "sweep": run_sweep,
    "action": run_action,
    "wiener-gen": run_wiener_gen,
}

HELP = {
    "compare": "classical vs quasiclassical trajectories (compare.csv)",
    "compare-stochastic": "recorded-noise trajectory vs stochastic quasiclassical path",
    "sweep": "Monte Carlo noise-ladder check of the deviation bound (sweep.csv)",
    "action": "minimal action / quasipotential between two points",
    "wiener-gen": "generate and save a seeded Wiener path (wiener.csv)",
    "presets": "list the built-in parameter sets",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="strongld", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"strongld {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(RUNNERS) + ["presets"]:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        if name == "presets":
            continue
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", metavar="FILE", help="INI experiment config")
        src.add_argument("--preset", metavar="TAG", help="built-in parameter set, e.g. Fig.3")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
        p.add_argument("--seed", metavar="U64", type=int,
                       help="sets both the Monte Carlo master seed and the Wiener seed")
        p.add_argument("--workers", type=int, help="threads for Monte Carlo chunks")
    return parser


def _resolve_config(args):
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = config_from_preset(args.preset)
    else:
        cfg = ExperimentConfig()
    changes = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        changes.update(master_seed=args.seed, wiener_seed=args.seed)
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.out:
        changes["output_dir"] = args.out
    return replace(cfg, **changes).validate() if changes else cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "presets":
        print(format_table())
        return EXIT_OK
    try:
        cfg = _resolve_config(args)
        report = RUNNERS[args.command](cfg, cfg.output_dir)
    except (StrongLDError, KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"strongld {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_FATAL
    for name, path in report.files.items():
        print(f"{name}: {path}")
    for note in report.notes:
        print(f"warning: {note}", file=sys.stderr)
    return EXIT_OK if report.complete else EXIT_UNCONVERGED


if __name__ == "__main__":
    sys.exit(main())
