import numpy as np
import pytest

from poikg.checkin_data import DataConfig, SplitDataset, TimeSlotSpec, cluster_regions, split_by_date
from poikg.errors import DataError
from poikg.kg_builder import build_graph
from poikg.recommender_eval import build_queries, evaluate, recommend_topk
from poikg.state import FACTORS_FILE, SPLIT_FILE, TRAIN_FILE, State


class TestSplit:
    def test_round_trip(self, tmp_path, tiny_log):
        split = split_by_date(tiny_log, 0.8)
        state = State(str(tmp_path / "run"))
        state.save_split(split)
        loaded = state.load_split()
        assert loaded.train == split.train
        assert loaded.test == split.test
        assert loaded.cutoff_timestamp == split.cutoff_timestamp

    def test_empty_test_side(self, tmp_path, tiny_log):
        state = State(str(tmp_path))
        state.save_split(SplitDataset(train=tiny_log, test=[], cutoff_timestamp=tiny_log[-1].timestamp))
        loaded = state.load_split()
        assert loaded.test == []
        assert loaded.train_fraction == 1.0


class TestGraph:
    def test_round_trip(self, tmp_path, tiny_log):
        regions = cluster_regions([(r.lat, r.lon) for r in tiny_log], 2)
        graph = build_graph(tiny_log, TimeSlotSpec(slot_hours=6), regions)
        state = State(str(tmp_path))
        state.save_graph(graph, regions, DataConfig(slot_hours=6, region_k=2))
        loaded, loaded_regions, data = state.load_graph()
        np.testing.assert_array_equal(loaded.triples, graph.triples)
        assert loaded.relations.paths == graph.relations.paths
        np.testing.assert_array_equal(loaded_regions.centroids, regions.centroids)
        assert (data.slot_hours, data.region_k) == (6, 2)


class TestRequire:
    def test_missing_artifact_names_its_producer(self, tmp_path):
        state = State(str(tmp_path))
        with pytest.raises(DataError, match="ingest"):
            state.require(TRAIN_FILE)
        with pytest.raises(DataError, match="train-mf"):
            state.load_factors()

    def test_present_artifact(self, tmp_path):
        (tmp_path / SPLIT_FILE).write_text("{}")
        State(str(tmp_path)).require(SPLIT_FILE)
        assert not State(str(tmp_path)).exists(FACTORS_FILE)


@pytest.mark.slow
class TestPipelineRoundTrip:
    @pytest.fixture(scope="class")
    def reloaded(self, tmp_path_factory, planted_split, planted_artifacts, fast_config):
        a = planted_artifacts
        state = State(str(tmp_path_factory.mktemp("artifacts")))
        state.save_split(planted_split)
        state.save_graph(a.graph, a.regions, a.cfg.data)
        state.save_transr(a.transr, a.loss_trace, a.cfg.transr)
        state.save_candidates(a.candidates, a.graph)
        state.save_factors(a.factors, a.st_trace, a.pref_trace)
        return state.load_pipeline(fast_config)

    def test_traces_and_factors(self, reloaded, planted_artifacts):
        assert reloaded.loss_trace == planted_artifacts.loss_trace
        assert reloaded.st_trace == planted_artifacts.st_trace
        assert reloaded.pref_trace == planted_artifacts.pref_trace
        np.testing.assert_array_equal(reloaded.factors.O, planted_artifacts.factors.O)
        np.testing.assert_array_equal(reloaded.transr.proj, planted_artifacts.transr.proj)
        assert reloaded.cfg.transr == planted_artifacts.cfg.transr

    def test_same_recommendations(self, reloaded, planted_split, planted_artifacts):
        queries = build_queries(planted_split.train, planted_split.test)
        for q in list(queries.values())[:10]:
            assert recommend_topk(q, 10, reloaded).items == recommend_topk(q, 10, planted_artifacts).items
        before = evaluate(planted_artifacts, planted_split.test).metrics_frame()
        after = evaluate(reloaded, planted_split.test).metrics_frame()
        assert before.equals(after)
