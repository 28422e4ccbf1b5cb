import argparse
from typing import Optional

import pandas as pd
from rich.table import Table

import poikg

DEFAULT_OUT_DIR = "./poikg_out"


class BaseCommand:

    @staticmethod
    def run(cli: "poikg.cli"):
        pass

    @staticmethod
    def add_args(parser: argparse.ArgumentParser):
        pass

    @staticmethod
    def check_config(config: "poikg.Config"):
        pass


def add_global_args(parser: argparse.ArgumentParser):
    """Flags every command accepts."""
    parser.add_argument(
        "--config",
        type=str,
        help="YAML file whose nested sections override the defaults; flags override the file.",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Seed for region clustering, TransR and MF; overrides each section's own seed.",
    )
    parser.add_argument(
        "--out-dir",
        dest="out_dir",
        type=str,
        default=DEFAULT_OUT_DIR,
        help="Artifact directory read and written by the pipeline stages.",
    )
    poikg.logging.add_args(parser)


def add_pipeline_args(parser: argparse.ArgumentParser):
    """Every pipeline section plus the global flags."""
    poikg.DataConfig.add_args(parser)
    poikg.TrainConfig.add_args(parser)
    poikg.ExtractionConfig.add_args(parser)
    poikg.MFConfig.add_args(parser)
    poikg.EvalConfig.add_args(parser)
    add_global_args(parser)


def pipeline_config(config: "poikg.Config") -> "poikg.PipelineConfig":
    return poikg.PipelineConfig.from_config(config, seed=config.get("seed"))


def state(config: "poikg.Config") -> "poikg.State":
    return poikg.State(config.get("out_dir") or DEFAULT_OUT_DIR)


def print_frame(frame: pd.DataFrame, title: Optional[str] = None, float_format: str = "{:.4f}"):
    """Renders a frame as a rich table on the package console."""
    table = Table(title=title, show_header=True, header_style="bold")
    for column in frame.columns:
        table.add_column(str(column), justify="right")
    for row in frame.itertuples(index=False):
        table.add_row(*[float_format.format(v) if isinstance(v, float) else str(v) for v in row])
    poikg.__console__.print(table)
