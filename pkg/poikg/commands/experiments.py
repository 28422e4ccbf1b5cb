import argparse

import poikg
from poikg.commands.base_command import BaseCommand, add_pipeline_args, pipeline_config, print_frame, state
from poikg.recommender_eval import parse_float_list, parse_int_list
from poikg.state import SPARSITY_FILE, SWEEP_DIM_FILE, SWEEP_TIMESLOT_FILE

from . import defaults


class SweepTimeslotCommand(BaseCommand):
    """
    Executes the ``sweep-timeslot`` command to retrain the pipeline for several time-slot lengths.

    Each row retrains from the stored split and reports Prec/Rec at 1, 10
    and 20 with the mean rank. Writes ``sweep_timeslot.csv``.

    Example usage::

        poikgcli sweep-timeslot --hours 1,2,4,8,12,24
    """

    @staticmethod
    def run(cli: "poikg.cli"):
        config = cli.config
        store = state(config)
        table = poikg.run_timeslot_sweep(store.load_split(), parse_int_list(config.hours), pipeline_config(config))
        table.to_csv(store.path(SWEEP_TIMESLOT_FILE), index=False, float_format="%.17g")
        print_frame(table, title="time-slot sweep")

    @staticmethod
    def add_args(parser: argparse.ArgumentParser):
        sweep_parser = parser.add_parser("sweep-timeslot", help="""Retrain and evaluate per time-slot length.""")
        sweep_parser.add_argument(
            "--hours", type=str, default=defaults.sweep.hours, help="Comma-separated slot lengths dividing 24."
        )
        add_pipeline_args(sweep_parser)


class SweepDimCommand(BaseCommand):
    """
    Executes the ``sweep-dim`` command to retrain the pipeline for several embedding dimensions.

    Entity and relation dimensions are both set to each value. Writes
    ``sweep_dim.csv``.

    Example usage::

        poikgcli sweep-dim --dims 70,80,90,100,110,120
    """

    @staticmethod
    def run(cli: "poikg.cli"):
        config = cli.config
        store = state(config)
        table = poikg.run_dim_sweep(store.load_split(), parse_int_list(config.dims), pipeline_config(config))
        table.to_csv(store.path(SWEEP_DIM_FILE), index=False, float_format="%.17g")
        print_frame(table, title="dimension sweep")

    @staticmethod
    def add_args(parser: argparse.ArgumentParser):
        sweep_parser = parser.add_parser("sweep-dim", help="""Retrain and evaluate per embedding dimension.""")
        sweep_parser.add_argument(
            "--dims", type=str, default=defaults.sweep.dims, help="Comma-separated embedding dimensions."
        )
        add_pipeline_args(sweep_parser)


class SparsityCommand(BaseCommand):
    """
    Executes the ``sparsity`` command to retrain with part of the training log removed.

    The test period and ground truth stay fixed. Writes ``sparsity.csv``.

    Example usage::

        poikgcli sparsity --fractions 0,0.1,0.2,0.3,0.4 --seed 0
    """

    @staticmethod
    def run(cli: "poikg.cli"):
        config = cli.config
        store = state(config)
        cfg = pipeline_config(config)
        seed = config.seed if config.get("seed") is not None else cfg.transr.seed
        table = poikg.run_sparsity_experiment(store.load_split(), parse_float_list(config.fractions), cfg, seed=seed)
        table.to_csv(store.path(SPARSITY_FILE), index=False, float_format="%.17g")
        print_frame(table, title="sparsity")

    @staticmethod
    def add_args(parser: argparse.ArgumentParser):
        sparsity_parser = parser.add_parser("sparsity", help="""Retrain and evaluate with training data removed.""")
        sparsity_parser.add_argument(
            "--fractions",
            type=str,
            default=defaults.sweep.fractions,
            help="Comma-separated shares of the training log to remove, each in [0, 1).",
        )
        add_pipeline_args(sparsity_parser)
