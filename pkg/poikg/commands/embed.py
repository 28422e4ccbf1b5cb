import argparse

import pandas as pd

import poikg
from poikg.candidate_extraction import entity_coordinates, entity_homes
from poikg.commands.base_command import BaseCommand, add_global_args, pipeline_config, print_frame, state


class TrainEmbedCommand(BaseCommand):
    """
    Executes the ``train-embed`` command to learn TransR embeddings over the stored graph.

    Writes ``transr.npz`` and the per-epoch mean loss in ``transr_loss.csv``.

    Example usage::

        poikgcli train-embed --transr.epochs 1000 --transr.dim_d 100 --seed 7
    """

    @staticmethod
    def run(cli: "poikg.cli"):
        r"""Train and checkpoint the embeddings."""
        config = cli.config
        cfg = pipeline_config(config).transr
        store = state(config)
        graph, _, _ = store.load_graph()
        with poikg.__console__.status(":hourglass: Training TransR..."):
            result = poikg.train(graph, cfg)
        store.save_transr(result.model, result.loss_trace, cfg)
        trace = result.loss_trace
        print_frame(
            pd.DataFrame(
                {
                    "epochs": [len(trace)],
                    "first_loss": [trace[0] if trace else float("nan")],
                    "final_loss": [trace[-1] if trace else float("nan")],
                }
            ),
            title="transr",
        )

    @staticmethod
    def add_args(parser: argparse.ArgumentParser):
        embed_parser = parser.add_parser("train-embed", help="""Train TransR embeddings on the stored graph.""")
        poikg.TrainConfig.add_args(embed_parser)
        add_global_args(embed_parser)


class ExtractCommand(BaseCommand):
    """
    Executes the ``extract`` command to select spatio-temporal candidate pairs.

    Per relation the best ``extract.theta_keep`` share of user-POI pairs is
    kept, then pairs farther than ``extract.theta_d_km`` (inflated by the
    user's home spread) from the user's home are dropped.

    Example usage::

        poikgcli extract --extract.theta_keep 0.5 --extract.theta_d_km 50
    """

    @staticmethod
    def run(cli: "poikg.cli"):
        r"""Extract and store candidates."""
        config = cli.config
        cfg = pipeline_config(config).extract
        store = state(config)
        split = store.load_split()
        graph, _, _ = store.load_graph()
        model, _, _ = store.load_transr()
        homes = entity_homes(graph, poikg.fit_home_locations(split.train))
        coords = entity_coordinates(graph, poikg.poi_coordinates(split.train))
        candidates = poikg.extract(model, graph, homes, coords, cfg)
        store.save_candidates(candidates, graph)
        print_frame(
            pd.DataFrame(
                {
                    "pairs": [len(candidates.pairs)],
                    "users": [len(candidates.user_set)],
                    "pois": [len(candidates.poi_set)],
                }
            ),
            title="candidates",
        )

    @staticmethod
    def add_args(parser: argparse.ArgumentParser):
        extract_parser = parser.add_parser("extract", help="""Extract spatio-temporal candidate user-POI pairs.""")
        poikg.ExtractionConfig.add_args(extract_parser)
        add_global_args(extract_parser)
