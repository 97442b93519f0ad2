"""``swlp simulate|admissibility|verify|wellposed --config FILE [--seed S] [--out DIR]``.

Exit status: 0 all records pass, 1 some tolerance failed, 2 configuration error
(a JSON error object is printed on standard error).
"""
import argparse
import logging
import sys

from .config import ConfigError, load_config
from .harness import COMMANDS
from .io import FormatError

log = logging.getLogger("swlp")


def build_parser():
    p = argparse.ArgumentParser(prog="swlp", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="override the output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed, output_dir=args.out)
        report = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(exc.as_json(), file=sys.stderr)
        return 2
    except FormatError as exc:
        print(ConfigError(str(exc), "params.system").as_json(), file=sys.stderr)
        return 2
    for r in report.records:
        bound = "" if r.comparison == "finite" else f" ({r.comparison} {r.tolerance})"
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.suite}/{r.name}: {r.value:.4g}{bound}")
    print(f"{args.command}: {'all passed' if report.passed else 'FAILED'} -> {cfg.output_dir}/summary.json")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
