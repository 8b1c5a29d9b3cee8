"""Command-line entry point: ``hybridsim <scenario> [--config PATH] [--set key=value ...]``."""

import argparse
import logging
import sys

from .errors import ConfigError, EigenError, HybridSimError, SingularGeometryError, ToleranceError
from .scenarios import SCENARIOS, load_config, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TOLERANCE = 3
EXIT_SINGULAR = 4

log = logging.getLogger("hybridsim")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hybridsim",
        description="Dissipative spin / magnetic-particle hybrid simulations and figure sweeps.",
    )
    parser.add_argument("scenario", choices=SCENARIOS)
    parser.add_argument("--config", help="JSON config file (merged over scenario defaults)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry by dotted path, e.g. sweep.gamma.count=20")
    parser.add_argument("--out", help="output path; '-' for stdout")
    parser.add_argument("--format", choices=("csv", "gnuplot"))
    parser.add_argument("--seed", type=int)
    parser.add_argument("--jobs", type=int)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    overrides = list(args.overrides)
    if args.out is not None:
        overrides.append(f"output.path={args.out}")
    if args.format is not None:
        overrides.append(f"output.format={args.format}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.jobs is not None:
        overrides.append(f"jobs={args.jobs}")

    try:
        cfg = load_config(args.scenario, args.config, overrides)
        table = run(cfg)
    except ConfigError as exc:
        print(f"hybridsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularGeometryError as exc:
        print(f"hybridsim: singular geometry: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (ToleranceError, EigenError) as exc:
        print(f"hybridsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except HybridSimError as exc:
        print(f"hybridsim: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE

    output = cfg.raw.get("output", {})
    text = table.render(output.get("format", "csv"))
    path = str(output.get("path", "-"))
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
        log.info("wrote %d rows to %s", len(table.rows), path)

    for failure in table.failures:
        print(f"hybridsim: tolerance failure: {failure}", file=sys.stderr)
    return EXIT_TOLERANCE if table.failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
