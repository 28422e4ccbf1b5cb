import math

import numpy as np
import pytest

from poikg.candidate_extraction import CandidateSet, ScoredPair
from poikg.checkin_data import RegionModel, SplitDataset
from poikg.commands import defaults
from poikg.combined_mf import FactorModel
from poikg.errors import ConfigError, EmptyCandidatePoolError, UnknownEntityError
from poikg.recommender_eval import (
    EvalConfig,
    PipelineArtifacts,
    PipelineConfig,
    Query,
    SyntheticSpec,
    build_queries,
    build_truth,
    evaluate,
    f1_at_k,
    fit_pipeline,
    generate_synthetic,
    ground_truth_frequency,
    parse_int_list,
    precision_at_k,
    random_baseline_precision,
    random_hit_probability,
    recall_at_k,
    recommend_topk,
    run_dim_sweep,
    run_sparsity_experiment,
    run_timeslot_sweep,
)
from poikg.transr import TrainConfig, init_model
from tests.conftest import T0, checkin, make_graph


def toy_artifacts(st, pref, train=(), candidate_pois=(0, 1, 2, 3), n_slots=1, path=(0, 0), slot_hours=24):
    """One user ``u0`` and four POIs; ``st``/``pref`` give each POI's factor with K=1 and unit user factors."""
    graph = make_graph(1, 4, [(0, 0, j) for j in range(4)], n_slots=n_slots, paths=(path,))
    cfg = PipelineConfig().replace(data={"slot_hours": slot_hours})
    factors = FactorModel(
        E=np.ones((1, 1)),
        O=np.array([[st[j] for j in candidate_pois]], dtype=float),
        U=np.ones((1, 1)),
        V=np.array([pref], dtype=float),
        alpha=0.0,
        st_users=["u0"],
        st_pois=[f"p{j}" for j in candidate_pois],
        users=["u0"],
        pois=[f"p{j}" for j in range(4)],
    )
    return PipelineArtifacts(
        cfg=cfg,
        train=list(train),
        regions=RegionModel(mode="kmeans", region_count=1, centroids=np.zeros((1, 2))),
        graph=graph,
        transr=init_model(graph, TrainConfig(dim_k=2, dim_d=2), np.random.default_rng(0)),
        loss_trace=[],
        homes={},
        poi_coords={},
        candidates=CandidateSet(
            user_set=[0],
            poi_set=[1 + j for j in candidate_pois],
            pairs=[ScoredPair(0, 1 + j, 0.0, 0.0, 0) for j in candidate_pois],
        ),
        factors=factors,
    )


QUERY = Query("u0", 0.0, 0.0, T0 + 3600)


def brute_force(recs, truth, k):
    prec = sum(len(set(recs.get(u, [])[:k]) & t) / k for u, t in truth.items()) / len(truth)
    rec = sum(len(set(recs.get(u, [])[:k]) & t) / len(t) for u, t in truth.items()) / len(truth)
    return prec, rec


class TestRecommendTopK:
    def test_hand_computed_order(self):
        # combined scores 1.0, 0.5, 0.5 and a clamped 0
        artifacts = toy_artifacts(st=[0.5, 2.0, 1.0, -1.0], pref=[2.0, 0.25, 0.5, 3.0])
        result = recommend_topk(QUERY, 4, artifacts)
        assert result.pois == ["p0", "p1", "p2", "p3"]
        np.testing.assert_allclose([s for _, s in result.items], [1.0, 0.5, 0.5, 0.0])

    def test_truncates_to_k(self):
        artifacts = toy_artifacts(st=[0.5, 2.0, 1.0, -1.0], pref=[2.0, 0.25, 0.5, 3.0])
        assert recommend_topk(QUERY, 2, artifacts).pois == ["p0", "p1"]
        assert recommend_topk(QUERY, 0, artifacts).items == []

    def test_single_candidate(self):
        artifacts = toy_artifacts(st=[0, -5.0, 0, 0], pref=[1, 1, 1, 1], candidate_pois=(1,))
        assert recommend_topk(QUERY, 10, artifacts).pois == ["p1"]

    def test_visited_pois_are_excluded(self):
        train = [checkin("u0", "p0"), checkin("u0", "p2")]
        artifacts = toy_artifacts(st=[1, 1, 1, 1], pref=[4, 3, 2, 1], train=train)
        assert recommend_topk(QUERY, 4, artifacts).pois == ["p1", "p3"]
        assert recommend_topk(QUERY, 4, artifacts, exclude_visited=False).pois == ["p0", "p1", "p2", "p3"]

    def test_everything_visited(self):
        train = [checkin("u0", f"p{j}") for j in range(4)]
        artifacts = toy_artifacts(st=[1, 1, 1, 1], pref=[1, 1, 1, 1], train=train)
        with pytest.raises(EmptyCandidatePoolError):
            recommend_topk(QUERY, 3, artifacts)

    def test_pool_widens_past_an_unseen_slot(self):
        # the only relation sits in the 16-24h slot; the query comes at 01:00
        artifacts = toy_artifacts(st=[1, 1, 1, 1], pref=[1, 2, 3, 4], n_slots=3, path=(2, 0), slot_hours=8)
        assert recommend_topk(QUERY, 2, artifacts).pois == ["p3", "p2"]

    def test_unknown_user(self):
        artifacts = toy_artifacts(st=[1, 1, 1, 1], pref=[1, 1, 1, 1])
        with pytest.raises(UnknownEntityError):
            recommend_topk(Query("nobody", 0, 0, T0), 3, artifacts)

    def test_negative_k(self):
        artifacts = toy_artifacts(st=[1, 1, 1, 1], pref=[1, 1, 1, 1])
        with pytest.raises(ValueError):
            recommend_topk(QUERY, -1, artifacts)

    def test_query_coordinates(self):
        with pytest.raises(ValueError):
            Query("u0", 91.0, 0.0, T0)

    def test_to_frame(self):
        artifacts = toy_artifacts(st=[0.5, 2.0, 1.0, -1.0], pref=[2.0, 0.25, 0.5, 3.0])
        frame = recommend_topk(QUERY, 3, artifacts).to_frame()
        assert list(frame.columns) == ["rank", "poi_key", "score"]
        assert frame["rank"].tolist() == [1, 2, 3]


class TestMetrics:
    TRUTH = {"A": {"v1", "v3"}, "B": {"v2"}}
    RECS = {"A": ["v1", "v2"], "B": ["v2", "v4"]}

    def test_worked_example(self):
        prec = precision_at_k(self.RECS, self.TRUTH, 2)
        rec = recall_at_k(self.RECS, self.TRUTH, 2)
        assert prec == 0.5
        assert rec == 0.75
        assert f1_at_k(prec, rec) == pytest.approx(0.6)

    def test_perfect_and_empty_hits(self):
        truth = {"A": {"v1", "v2", "v3"}}
        assert precision_at_k({"A": ["v3", "v1"]}, truth, 2) == 1.0
        assert precision_at_k({"A": ["v7", "v8"]}, truth, 2) == 0.0
        assert recall_at_k({"A": ["v1", "v2", "v3", "v9"]}, truth, 4) == 1.0

    def test_single_hit(self):
        truth = {u: {"x"} for u in "abcd"}
        assert recall_at_k({"a": ["x"]}, truth, 1) == 0.25

    def test_random_fixtures_match_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n_users = int(rng.integers(1, 11))
            n_pois = int(rng.integers(2, 21))
            pois = [f"v{j}" for j in range(n_pois)]
            truth = {
                f"u{i}": set(rng.choice(pois, size=int(rng.integers(1, n_pois + 1)), replace=False).tolist())
                for i in range(n_users)
            }
            recs = {
                u: rng.choice(pois, size=int(rng.integers(0, n_pois + 1)), replace=False).tolist() for u in truth
            }
            k = int(rng.integers(1, n_pois + 1))
            expected_prec, expected_rec = brute_force(recs, truth, k)
            prec = precision_at_k(recs, truth, k)
            rec = recall_at_k(recs, truth, k)
            assert abs(prec - expected_prec) <= 1e-12
            assert abs(rec - expected_rec) <= 1e-12
            assert 0.0 <= f1_at_k(prec, rec) <= 1.0

    def test_recall_non_decreasing_in_k(self):
        rng = np.random.default_rng(1)
        pois = [f"v{j}" for j in range(20)]
        truth = {f"u{i}": set(rng.choice(pois, size=4, replace=False).tolist()) for i in range(10)}
        recs = {u: rng.permutation(pois).tolist() for u in truth}
        recalls = [recall_at_k(recs, truth, k) for k in range(1, 21)]
        assert all(b >= a for a, b in zip(recalls, recalls[1:]))
        assert recalls[-1] == 1.0

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            precision_at_k(self.RECS, self.TRUTH, 0)
        with pytest.raises(ValueError):
            recall_at_k(self.RECS, {"A": set()}, 2)
        with pytest.raises(ValueError):
            precision_at_k(self.RECS, {}, 2)
        with pytest.raises(ValueError):
            f1_at_k(1.5, 0.2)

    @pytest.mark.parametrize("prec, rec, expected", [(0.5, 0.5, 0.5), (0.0, 0.7, 0.0), (0.0, 0.0, 0.0)])
    def test_f1(self, prec, rec, expected):
        assert f1_at_k(prec, rec) == pytest.approx(expected)

    def test_random_baselines(self):
        expected_miss = math.comb(95, 10) / math.comb(100, 10)
        assert random_hit_probability(100, 5, 10) == pytest.approx(1 - expected_miss)
        assert random_hit_probability(10, 1, 20) == pytest.approx(1.0)
        truth = {"a": {"x", "y"}, "b": {"z"}}
        assert random_baseline_precision(truth, 100, 10) == pytest.approx((0.02 + 0.01) / 2)


class TestGroundTruth:
    def setup_method(self):
        self.train = [checkin("a", "p1", ts=T0), checkin("a", "p2", ts=T0 + 10), checkin("b", "p1", ts=T0 + 5)]
        self.test = [
            checkin("a", "p1", ts=T0 + 100),
            checkin("a", "p3", 1.0, 2.0, ts=T0 + 200, category="bar"),
            checkin("a", "p3", ts=T0 + 300),
            checkin("b", "p1", ts=T0 + 150),
            checkin("c", "p9", ts=T0 + 120),
        ]

    def test_novel_truth(self):
        assert build_truth(self.train, self.test) == {"a": {"p3"}}

    def test_truth_with_repeats(self):
        assert build_truth(self.train, self.test, exclude_visited=False) == {"a": {"p1", "p3"}, "b": {"p1"}}

    def test_queries_replay_last_location_and_first_test_time(self):
        train = self.train + [checkin("a", "p4", 5.0, 6.0, ts=T0 + 50)]
        queries = build_queries(train, self.test)
        assert sorted(queries) == ["a", "b"]
        assert (queries["a"].lat, queries["a"].lon, queries["a"].timestamp) == (5.0, 6.0, T0 + 100)

    def test_frequency_report(self):
        frame = ground_truth_frequency(self.test, build_truth(self.train, self.test, exclude_visited=False))
        assert frame.values.tolist() == [["a", "p1", 1], ["a", "p3", 2], ["b", "p1", 1]]


class TestConfig:
    def test_ks_are_parsed_sorted_and_unique(self):
        assert EvalConfig.from_config({"ks": "10,1,5,10"}).ks == (1, 5, 10)
        assert parse_int_list([3, 1]) == (3, 1)

    @pytest.mark.parametrize("ks", ["0,5", "a,b", ""])
    def test_invalid_ks(self, ks):
        with pytest.raises(ConfigError):
            EvalConfig.from_config({"ks": ks})

    def test_replace_validates(self):
        cfg = PipelineConfig().replace(transr={"dim_d": 50})
        assert cfg.transr.dim_d == 50
        assert cfg.transr.dim_k == 100
        with pytest.raises(ConfigError):
            cfg.replace(data={"slot_hours": 7})

    def test_seed_reaches_every_section(self):
        cfg = PipelineConfig().with_seed(9)
        assert (cfg.data.kmeans_seed, cfg.transr.seed, cfg.mf.seed) == (9, 9, 9)


class TestSynthetic:
    def test_deterministic_per_seed(self):
        spec = SyntheticSpec(users=5, pois=12, seed=3)
        assert generate_synthetic(spec) == generate_synthetic(spec)
        assert generate_synthetic(spec) != generate_synthetic(SyntheticSpec(users=5, pois=12, seed=4))

    def test_full_strength_hits_only_preferred(self):
        spec = SyntheticSpec(users=10, pois=40, regions=4, slots=3, strength=1.0, preferred_per_user=3)
        records = generate_synthetic(spec)
        assert len(records) == 10 * spec.checkins_per_user
        for user in {r.user_id for r in records}:
            mine = [r for r in records if r.user_id == user]
            pois = {r.poi_id for r in mine}
            assert len(pois) <= 3
            assert len({int(p[1:]) % 4 for p in pois}) == 1
            assert len({int((r.timestamp % 86400) // (8 * 3600)) for r in mine}) == 1

    def test_zero_strength_spreads_over_pois(self):
        records = generate_synthetic(SyntheticSpec(strength=0.0))
        assert len({r.poi_id for r in records}) > 90

    def test_layout(self):
        records = generate_synthetic(SyntheticSpec(users=3, pois=8, regions=4, categories=3))
        spec = SyntheticSpec(regions=4)
        for r in records:
            j = int(r.poi_id[1:])
            center = spec.region_center(j % 4)
            assert abs(r.lat - center[0]) <= 0.05 and abs(r.lon - center[1]) <= 0.05
            assert r.category == f"cat{j % 3}"

    @pytest.mark.parametrize("values", [{"slots": 5}, {"strength": 1.5}, {"users": 0}, {"pois": 2, "regions": 4}])
    def test_invalid_spec(self, values):
        with pytest.raises(ValueError):
            SyntheticSpec(**values)


class TestSweepGrids:
    # Values are validated before any retraining, so a trailing illegal value fails fast.
    def test_every_standard_slot_length_is_accepted(self, planted_split, fast_config):
        with pytest.raises(ConfigError, match="got 5"):
            run_timeslot_sweep(planted_split, [1, 2, 4, 8, 12, 24, 5], fast_config)

    def test_every_standard_dimension_is_accepted(self, planted_split, fast_config):
        with pytest.raises(ConfigError, match="got 0"):
            run_dim_sweep(planted_split, [70, 80, 90, 100, 110, 120, 0], fast_config)

    def test_cli_defaults(self):
        assert parse_int_list(defaults.sweep.hours) == (1, 2, 4, 8, 12, 24)
        assert parse_int_list(defaults.sweep.dims) == (70, 80, 90, 100, 110, 120)


@pytest.mark.slow
class TestPlantedPipeline:
    def test_beats_random_ranking_threefold(self, planted_spec, planted_split, planted_artifacts):
        result = evaluate(planted_artifacts, planted_split.test, ks=(10,))
        baseline = random_baseline_precision(result.truth, planted_spec.pois, 10)
        assert result.report(10).prec >= 3 * baseline

    def test_evaluation_bounds(self, planted_split, planted_artifacts):
        result = evaluate(planted_artifacts, planted_split.test, ks=(1, 5, 10, 20))
        recalls = [r.rec for r in result.reports]
        assert all(b >= a for a, b in zip(recalls, recalls[1:]))
        for report in result.reports:
            assert 0 <= report.prec <= 1 and 0 <= report.rec <= 1 and 0 <= report.f1 <= 1
            assert report.n_users == len(result.truth)
        assert list(result.metrics_frame().columns) == ["k", "prec", "rec", "f1", "mean_rank"]
        assert all(len(recs) <= 20 for recs in result.recommendations.values())

    def test_recommendations_skip_visited(self, planted_split, planted_artifacts):
        queries = build_queries(planted_artifacts.train, planted_split.test)
        for user, q in list(queries.items())[:10]:
            result = recommend_topk(q, 10, planted_artifacts, exclude_visited=True)
            assert len(result.items) <= 10
            assert not set(result.pois) & planted_artifacts.visited[user]
            assert len(set(result.pois)) == len(result.pois)
            scores = [s for _, s in result.items]
            assert scores == sorted(scores, reverse=True)

    def test_fixed_seed_reproduces_the_pipeline(self, planted_split, fast_config, planted_artifacts):
        again = fit_pipeline(planted_split.train, fast_config)
        assert again.loss_trace == planted_artifacts.loss_trace
        np.testing.assert_array_equal(again.factors.U, planted_artifacts.factors.U)

    def test_sparsity_identity_and_trend(self, planted_split, fast_config, planted_artifacts):
        table = run_sparsity_experiment(planted_split, [0.0, 0.4], fast_config, seed=0)
        assert list(table.columns) == ["fraction", "prec@10", "rec@10", "f1@10"]
        base = evaluate(planted_artifacts, planted_split.test, ks=(10,)).report(10)
        assert table["prec@10"].iloc[0] == base.prec
        assert table["prec@10"].iloc[1] < table["prec@10"].iloc[0]

    def test_sparsity_rejects_full_removal(self, planted_split, fast_config):
        with pytest.raises(ConfigError):
            run_sparsity_experiment(planted_split, [1.0], fast_config)

    def test_timeslot_sweep(self, planted_split, fast_config):
        table = run_timeslot_sweep(planted_split, [24, 8], fast_config)
        assert table["hours"].tolist() == [24, 8]
        assert not table.isna().any().any()
        assert list(table.columns[1:7]) == ["prec@1", "prec@10", "prec@20", "rec@1", "rec@10", "rec@20"]

    def test_whole_day_slot_gives_one_relation_per_region(self, planted_split, fast_config):
        artifacts = fit_pipeline(planted_split.train, fast_config.replace(data={"slot_hours": 24}))
        assert artifacts.graph.n_relations == artifacts.regions.region_count

    def test_dim_sweep(self, planted_split, fast_config):
        table = run_dim_sweep(planted_split, [5, 50], fast_config)
        assert table["dim"].tolist() == [5, 50]
        assert table["epochs_trained"].tolist() == [fast_config.transr.epochs] * 2

    def test_sweeps_reject_illegal_values(self, planted_split, fast_config):
        with pytest.raises(ConfigError):
            run_timeslot_sweep(planted_split, [5], fast_config)
        with pytest.raises(ConfigError):
            run_dim_sweep(planted_split, [0], fast_config)

    def test_split_keeps_every_test_record_after_train(self, planted_split):
        assert isinstance(planted_split, SplitDataset)
        assert max(r.timestamp for r in planted_split.train) < min(r.timestamp for r in planted_split.test)
