import argparse

import pandas as pd

import poikg
from poikg.commands.base_command import BaseCommand, add_global_args, pipeline_config, print_frame, state


class BuildGraphCommand(BaseCommand):
    """
    Executes the ``build-graph`` command to turn the training log into the user-POI graph.

    Regions come from k-means over the training coordinates (``data.region_k``)
    or from a label file (``data.region_label_file``); time slots are
    ``data.slot_hours`` long. The data section used is stored next to the
    graph so later stages assign queries the same way.

    Example usage::

        poikgcli build-graph --data.slot_hours 8 --data.region_k 200
    """

    @staticmethod
    def run(cli: "poikg.cli"):
        r"""Fit regions and build the graph."""
        config = cli.config
        data = pipeline_config(config).data
        store = state(config)
        split = store.load_split()
        regions = poikg.checkin_data.fit_regions(split.train, data)
        graph = poikg.build_graph(split.train, data.slots, regions, data.use_category, data.tz_offset)
        store.save_graph(graph, regions, data)
        print_frame(
            pd.DataFrame(
                {
                    "users": [graph.vocab.n_users],
                    "pois": [graph.vocab.n_pois],
                    "relations": [graph.n_relations],
                    "triples": [len(graph)],
                    "regions": [regions.region_count],
                }
            ),
            title="graph",
        )

    @staticmethod
    def add_args(parser: argparse.ArgumentParser):
        graph_parser = parser.add_parser("build-graph", help="""Build the user-POI graph from the training log.""")
        poikg.DataConfig.add_args(graph_parser)
        add_global_args(graph_parser)
