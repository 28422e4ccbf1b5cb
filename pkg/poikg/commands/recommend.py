import argparse

import poikg
from poikg.checkin_data import parse_timestamp
from poikg.commands.base_command import BaseCommand, add_pipeline_args, pipeline_config, print_frame, state
from poikg.recommender_eval import parse_int_list
from poikg.state import GROUND_TRUTH_FILE, METRICS_FILE, RECOMMENDATIONS_FILE

from . import defaults


class RecommendCommand(BaseCommand):
    """
    Executes the ``recommend`` command to rank POIs for one query.

    The query is a user, a location and a time (epoch seconds or a date
    string read as UTC), optionally a category. The ranked list is printed and
    written to ``recommendations.tsv``.

    Example usage::

        poikgcli recommend --user u001 --lat 30.01 --lon -99.98 --time "2011-06-01 18:30:00" --k 10
    """

    @staticmethod
    def run(cli: "poikg.cli"):
        r"""Answer the query."""
        config = cli.config
        store = state(config)
        artifacts = store.load_pipeline(pipeline_config(config))
        query = poikg.Query(
            user=str(config.user),
            lat=float(config.lat),
            lon=float(config.lon),
            timestamp=parse_timestamp(config.time),
            category=config.get("category"),
        )
        recs = poikg.recommend_topk(query, int(config.k), artifacts)
        frame = recs.to_frame()
        frame.insert(0, "user_key", query.user)
        frame.to_csv(store.path(RECOMMENDATIONS_FILE), sep="\t", index=False, float_format="%.17g")
        print_frame(frame, title=f"top-{config.k} for {query.user}")

    @staticmethod
    def check_config(config: "poikg.Config"):
        missing = [flag for flag in ("user", "lat", "lon", "time") if config.get(flag) is None]
        if missing:
            raise poikg.ConfigError(f"recommend needs {', '.join('--' + m for m in missing)}")
        if not -90.0 <= float(config.lat) <= 90.0 or not -180.0 <= float(config.lon) <= 180.0:
            raise poikg.ConfigError(f"Query coordinates out of range: ({config.lat}, {config.lon})")
        if int(config.k) < 0:
            raise poikg.ConfigError(f"--k must be >= 0, got {config.k}")

    @staticmethod
    def add_args(parser: argparse.ArgumentParser):
        recommend_parser = parser.add_parser("recommend", help="""Rank POIs for a user, location and time.""")
        recommend_parser.add_argument("--user", type=str, required=False, help="User key.")
        recommend_parser.add_argument("--lat", type=float, required=False, help="Query latitude.")
        recommend_parser.add_argument("--lon", type=float, required=False, help="Query longitude.")
        recommend_parser.add_argument("--time", type=str, required=False, help="Epoch seconds or a date string.")
        recommend_parser.add_argument("--category", type=str, required=False, help="Optional POI category.")
        recommend_parser.add_argument("--k", type=int, default=defaults.recommend.k, help="List length.")
        add_pipeline_args(recommend_parser)


class EvaluateCommand(BaseCommand):
    """
    Executes the ``evaluate`` command to score the fitted pipeline on the test period.

    Each user with check-ins on both sides of the cutoff gets one replayed
    query; Prec@k, Rec@k and F1@k are averaged over those users. Writes
    ``metrics.csv`` and ``ground_truth.tsv``.

    Example usage::

        poikgcli evaluate --k 1,5,10,20
    """

    @staticmethod
    def run(cli: "poikg.cli"):
        r"""Evaluate the stored pipeline."""
        config = cli.config
        store = state(config)
        cfg = pipeline_config(config)
        if config.get("k"):
            cfg = cfg.replace(eval={"ks": parse_int_list(config.k)})
        artifacts = store.load_pipeline(cfg)
        split = store.load_split()
        result = poikg.evaluate(artifacts, split.test)
        metrics = result.metrics_frame()
        metrics.to_csv(store.path(METRICS_FILE), index=False, float_format="%.17g")
        result.ground_truth.to_csv(store.path(GROUND_TRUTH_FILE), sep="\t", index=False)
        print_frame(metrics, title=f"evaluation over {len(result.truth)} users")

    @staticmethod
    def add_args(parser: argparse.ArgumentParser):
        evaluate_parser = parser.add_parser("evaluate", help="""Evaluate the fitted pipeline on the test period.""")
        evaluate_parser.add_argument(
            "--k", type=str, required=False, help="Comma-separated cutoffs; overrides --eval.ks."
        )
        add_pipeline_args(evaluate_parser)
