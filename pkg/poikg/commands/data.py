import argparse
import os

import pandas as pd

import poikg
from poikg.checkin_data import write_checkins
from poikg.commands.base_command import BaseCommand, add_global_args, print_frame, state

from . import defaults


class SynthCommand(BaseCommand):
    """
    Executes the ``synth`` command to write a planted-preference check-in log.

    Every synthetic user has a home region, a favorite time slot and a few
    preferred POIs; ``--synth.strength`` is the share of check-ins that hit
    them. The log can be fed to ``ingest`` like a real dump.

    Example usage::

        poikgcli synth --synth.users 50 --synth.pois 100 --seed 0
        poikgcli ingest --path ./poikg_out/synthetic.csv
    """

    @staticmethod
    def run(cli: "poikg.cli"):
        r"""Generate and write the synthetic log."""
        config = cli.config
        fields = {
            name: config.synth[name]
            for name in poikg.SyntheticSpec.model_fields
            if config.synth and config.synth.get(name) is not None
        }
        if config.get("seed") is not None:
            fields["seed"] = config.seed
        try:
            spec = poikg.SyntheticSpec(**fields)
        except ValueError as e:
            raise poikg.ConfigError(f"Invalid synthetic spec: {e}") from e

        records = poikg.generate_synthetic(spec)
        path = config.get("path") or state(config).ensure_dir().path(defaults.synth_file)
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        write_checkins(records, path)
        poikg.logging.success(f"Wrote {len(records)} synthetic check-ins to {path}")
        print_frame(
            pd.DataFrame(
                {"users": [spec.users], "pois": [spec.pois], "checkins": [len(records)], "strength": [spec.strength]}
            ),
            title="synthetic log",
        )

    @staticmethod
    def add_args(parser: argparse.ArgumentParser):
        synth_parser = parser.add_parser("synth", help="""Write a synthetic check-in log with planted preferences.""")
        synth_parser.add_argument("--path", type=str, required=False, help="Output CSV (default <out-dir>/synthetic.csv).")
        spec = poikg.SyntheticSpec()
        for name, value in spec.model_dump().items():
            if name == "seed":
                continue
            synth_parser.add_argument(
                "--synth." + name,
                type=type(value),
                default=value,
                help=f"Synthetic log {name.replace('_', ' ')}.",
            )
        add_global_args(synth_parser)


class IngestCommand(BaseCommand):
    """
    Executes the ``ingest`` command to parse a check-in file and split it by date.

    The first ``data.train_fraction`` of the log in time becomes the training
    period; ``train.csv``, ``test.csv`` and ``split.json`` are written to the
    artifact directory.

    Example usage::

        poikgcli ingest --path checkins.csv --data.delimiter $'\\t'
    """

    @staticmethod
    def run(cli: "poikg.cli"):
        r"""Parse and split the log."""
        config = cli.config
        data = poikg.DataConfig.from_config(config)
        records = poikg.parse_checkins(config.path, data.checkin_format)
        split = poikg.split_by_date(records, data.train_fraction)
        state(config).save_split(split)
        print_frame(
            pd.DataFrame(
                {
                    "parsed": [len(records)],
                    "rejected": [records.rejected],
                    "train": [len(split.train)],
                    "test": [len(split.test)],
                    "train_share": [split.train_fraction],
                }
            ),
            title="ingest",
        )

    @staticmethod
    def check_config(config: "poikg.Config"):
        if not config.get("path"):
            raise poikg.ConfigError("ingest needs --path to a check-in file")

    @staticmethod
    def add_args(parser: argparse.ArgumentParser):
        ingest_parser = parser.add_parser("ingest", help="""Parse a check-in file and split it by date.""")
        ingest_parser.add_argument("--path", type=str, required=False, help="Check-in file.")
        poikg.DataConfig.add_args(ingest_parser)
        add_global_args(ingest_parser)
