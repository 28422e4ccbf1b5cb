import argparse

import pandas as pd

import poikg
from poikg.commands.base_command import BaseCommand, add_global_args, pipeline_config, print_frame, state


class TrainMFCommand(BaseCommand):
    """
    Executes the ``train-mf`` command to factorize the candidate and global check-in matrices.

    Writes ``factors.npz`` and both objective traces in ``mf_objective.csv``.

    Example usage::

        poikgcli train-mf --mf.k 20 --mf.alpha 0.01 --mf.epochs 200
    """

    @staticmethod
    def run(cli: "poikg.cli"):
        r"""Fit both factorizations."""
        config = cli.config
        cfg = pipeline_config(config).mf
        store = state(config)
        split = store.load_split()
        graph, _, _ = store.load_graph()
        candidates = store.load_candidates(graph)
        with poikg.__console__.status(":hourglass: Factorizing..."):
            result = poikg.fit_combined_mf(split.train, graph, candidates, cfg)
        store.save_factors(result.model, result.st_trace, result.pref_trace)
        print_frame(
            pd.DataFrame(
                {
                    "matrix": ["spatio-temporal", "preference"],
                    "initial": [result.st_trace[0], result.pref_trace[0]],
                    "final": [result.st_trace[-1], result.pref_trace[-1]],
                }
            ),
            title="mf objective",
        )

    @staticmethod
    def add_args(parser: argparse.ArgumentParser):
        mf_parser = parser.add_parser("train-mf", help="""Fit the combined matrix factorization.""")
        poikg.MFConfig.add_args(mf_parser)
        add_global_args(mf_parser)
