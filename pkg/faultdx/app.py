import argparse
import logging
import sys
from os import environ
from pathlib import Path
from typing import Optional, Sequence

import dotenv
from pydantic import ValidationError

dotenv.load_dotenv()

from faultdx.augment import AugmentException
from faultdx.commands import UsageException, dataset, model, sweep
from faultdx.config_parser import ParserException
from faultdx.core import SignalException
from faultdx.experiment import ExperimentAborted
from faultdx.models.experiment import ExperimentException, load_experiment_config
from faultdx.net1d import ModelFileException, TrainingException
from faultdx.spectral import SpectralException
from faultdx.synthgen import SynthesisException

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3
# An experiment run failed for a reason outside the cases above
EXIT_INTERNAL = 4

DATA_ERRORS = (
    ParserException,
    ModelFileException,
    ValidationError,
    FileNotFoundError,
    SignalException,
    SpectralException,
    SynthesisException,
    AugmentException,
    ExperimentException,
)

COMMAND_GROUPS = [dataset, model, sweep]


class CliParser(argparse.ArgumentParser):
    """Raises instead of exiting so usage errors map onto their own exit code"""

    def error(self, message):
        raise UsageException(f"{self.prog}: error: {message}")


def common_options() -> argparse.ArgumentParser:
    common = CliParser(add_help=False)
    common.add_argument("--config", type=Path, default=environ.get("FAULTDX_CONFIG"),
                        help="Experiment config file (default: $FAULTDX_CONFIG)")
    common.add_argument("--seed", type=int, help="Master seed, overrides the config")
    common.add_argument("--out", type=Path, help="Output directory, overrides paths.out_dir")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="Config override, e.g. --set train.patience=4 (repeatable)")
    return common


def build_parser() -> CliParser:
    parser = CliParser(
        prog="faultdx",
        description="Rotating machinery fault diagnosis trained on synthetic signals",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")

    common = common_options()
    for group in COMMAND_GROUPS:
        group.register(subparsers, common)

    return parser


def exit_code(e: BaseException) -> int:
    if isinstance(e, ExperimentAborted):
        return exit_code(e.cause)
    if isinstance(e, TrainingException):
        return EXIT_NUMERIC
    if isinstance(e, DATA_ERRORS):
        return EXIT_DATA
    return EXIT_INTERNAL


def configure_logging():
    logging.basicConfig(
        level=environ.get("FAULTDX_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    parser = build_parser()

    try:
        args = parser.parse_args(argv)
    except UsageException as e:
        parser.print_usage(sys.stderr)
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    try:
        cfg = load_experiment_config(args.config, args.set, args.seed, args.out)
        cfg.check_paths()
        return args.handler(args, cfg)
    except UsageException as e:
        print(f"faultdx {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ExperimentAborted, TrainingException, *DATA_ERRORS) as e:
        code = exit_code(e)
        if code == EXIT_INTERNAL:
            log.error(f"Unexpected failure in {args.command}", exc_info=e)
        print(f"faultdx {args.command}: {e}", file=sys.stderr)
        return code


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
