#!/usr/bin/env python3

import argparse
import shtab
import sys
import poikg
from typing import List, Optional

from .commands import (
    BuildGraphCommand,
    EvaluateCommand,
    ExtractCommand,
    IngestCommand,
    RecommendCommand,
    SparsityCommand,
    SweepDimCommand,
    SweepTimeslotCommand,
    SynthCommand,
    TrainEmbedCommand,
    TrainMFCommand,
)

# Create a console instance for CLI display.
console = poikg.__console__

COMMANDS = {
    "synth": SynthCommand,
    "ingest": IngestCommand,
    "build-graph": BuildGraphCommand,
    "train-embed": TrainEmbedCommand,
    "extract": ExtractCommand,
    "train-mf": TrainMFCommand,
    "recommend": RecommendCommand,
    "evaluate": EvaluateCommand,
    "sweep-timeslot": SweepTimeslotCommand,
    "sweep-dim": SweepDimCommand,
    "sparsity": SparsityCommand,
}


class CLIErrorParser(argparse.ArgumentParser):
    """
    Custom ArgumentParser for better error messages.
    """

    def error(self, message):
        """
        This method is called when an error occurs. It prints a custom error message.
        """
        sys.stderr.write(f"Error: {message}\n")
        self.print_help()
        sys.exit(2)


class cli:
    """
    Command line interface over the pipeline stages. Every stage reads and
    writes the artifact directory given by ``--out-dir``.
    """

    def __init__(
            self,
            config: Optional["poikg.Config"] = None,
            args: Optional[List[str]] = None,
    ):
        """
        Initializes a CLI object.

        Args:
            config (poikg.Config, optional): The configuration settings for the CLI.
            args (List[str], optional): List of command line arguments.
        """
        if config is None:
            config = cli.create_config(args)

        self.config = config
        if self.config.command not in COMMANDS:
            console.print(f":cross_mark:[red]Unknown command: {self.config.command}[/red]")
            sys.exit(2)

        poikg.logging(config=self.config)
        cli.check_config(self.config)

    @staticmethod
    def __create_parser__() -> "argparse.ArgumentParser":
        """
        Creates the argument parser for the CLI.

        Returns:
            argparse.ArgumentParser: An argument parser object for CLI.
        """
        parser = CLIErrorParser(
            description=f"poikg cli v{poikg.__version__}",
            usage="poikgcli <command> <command args>",
            add_help=True,
        )
        parser.add_argument(
            "--print-completion",
            choices=shtab.SUPPORTED_SHELLS,
            help="Print shell tab completion script",
        )
        cmd_parsers = parser.add_subparsers(dest="command", parser_class=CLIErrorParser)
        for command in COMMANDS.values():
            command.add_args(cmd_parsers)

        return parser

    @staticmethod
    def create_config(args: List[str]) -> "poikg.Config":
        """
        From the argument parser, add config to executor and local config

        Args:
            args (List[str]): List of command line arguments.

        Returns:
            config: The configuration object for the CLI.
        """
        parser = cli.__create_parser__()

        # If no arguments are passed, print help text and exit the program.
        if len(args) == 0:
            parser.print_help()
            sys.exit()

        return poikg.Config(parser, args=args)

    @staticmethod
    def check_config(config: "poikg.Config"):
        """
        Runs the command's own config checks.
        """
        COMMANDS[config.command].check_config(config)

    def run(self):
        """
        Executes the command from the configuration.
        """
        if self.config.get("print_completion"):
            print(shtab.complete(cli.__create_parser__(), self.config.print_completion))
            return
        COMMANDS[self.config.command].run(self)


def main(args: Optional[List[str]] = None) -> int:
    """
    Console entry point. Returns the exit code: 0 on success, 2 for
    configuration errors, 3 for data errors and 4 for numerical divergence.
    """
    args = sys.argv[1:] if args is None else list(args)

    parser = cli.__create_parser__()
    known, _ = parser.parse_known_args(args)
    if known.print_completion:  # Check for print-completion argument
        print(shtab.complete(parser, known.print_completion))
        return 0

    try:
        cli(args=args).run()
    except poikg.PoikgError as e:
        console.print(f":cross_mark:[red]{type(e).__name__}[/red]: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        print('KeyboardInterrupt')
        return 130
    return 0


if __name__ == '__main__':
    sys.exit(main())
