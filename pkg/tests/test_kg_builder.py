import numpy as np
import pytest

from poikg.checkin_data import TimeSlotSpec, assign_time_slot, cluster_regions
from poikg.errors import DataError, NegativeSamplingError, UnknownEntityError, UnknownRelationError
from poikg.kg_builder import (
    EntityVocab,
    KnowledgeGraph,
    NegativeSampler,
    RelationVocab,
    build_graph,
    compose_relation_id,
    sample_negatives,
)
from tests.conftest import grouped_graph, make_graph


@pytest.fixture
def tiny_graph(tiny_log):
    regions = cluster_regions([(r.lat, r.lon) for r in tiny_log], 1)
    return build_graph(tiny_log, TimeSlotSpec(slot_hours=8), regions)


def assert_sound(graph, positives, negatives):
    n_users = graph.vocab.n_users
    for pos, neg in zip(positives, negatives):
        assert not graph.contains(*neg)
        assert neg[1] == pos[1]
        assert int(neg[0] != pos[0]) + int(neg[2] != pos[2]) == 1
        assert 0 <= neg[0] < n_users
        assert n_users <= neg[2] < graph.vocab.n_entities


class TestEntityVocab:
    def test_index_spaces_do_not_overlap(self):
        vocab = EntityVocab(["a", "b"], ["x", "y", "z"])
        users = {vocab.user_entity(k) for k in vocab.users}
        pois = {vocab.poi_entity(k) for k in vocab.pois}
        assert users == {0, 1}
        assert pois == {2, 3, 4}
        assert vocab.key_of(3) == "y"
        assert vocab.n_entities == 5

    def test_same_key_as_user_and_poi(self):
        vocab = EntityVocab(["42"], ["42"])
        assert vocab.user_entity("42") != vocab.poi_entity("42")

    def test_unknown_keys(self):
        vocab = EntityVocab(["a"], ["x"])
        with pytest.raises(UnknownEntityError):
            vocab.user_index("x")
        with pytest.raises(UnknownEntityError):
            vocab.poi_entity("a")
        with pytest.raises(UnknownEntityError):
            vocab.key_of(7)

    def test_duplicates_rejected(self):
        with pytest.raises(DataError):
            EntityVocab(["a", "a"], ["x"])


class TestRelationVocab:
    def test_compose_is_interned(self):
        vocab = RelationVocab(3, 4)
        first = vocab.compose(1, 2)
        assert vocab.compose(1, 2) == first
        assert compose_relation_id(vocab, 1, 2) == first
        assert vocab.compose(2, 1) != first
        assert len(vocab) == 2

    def test_distinct_paths_get_distinct_ids(self):
        vocab = RelationVocab(3, 4)
        ids = {vocab.compose(t, l) for t in range(3) for l in range(4)}
        assert ids == set(range(12))

    def test_category_is_part_of_the_path(self):
        vocab = RelationVocab(1, 1, ["bar", "food"])
        assert vocab.compose(0, 0) != vocab.compose(0, 0, 1)
        assert vocab[vocab.compose(0, 0, 1)].category == 1
        assert vocab.category_index("food") == 1

    @pytest.mark.parametrize("t, l, c", [(3, 0, None), (0, 4, None), (-1, 0, None), (0, 0, 0)])
    def test_components_out_of_range(self, t, l, c):
        with pytest.raises(UnknownRelationError):
            RelationVocab(3, 4).compose(t, l, c)

    def test_lookup_unobserved(self):
        vocab = RelationVocab(3, 4)
        vocab.compose(0, 0)
        assert vocab.get(1, 1) is None
        with pytest.raises(UnknownRelationError):
            vocab.lookup(1, 1)

    def test_components_table(self):
        vocab = RelationVocab(2, 2, ["a"])
        vocab.compose(1, 0)
        vocab.compose(0, 1, 0)
        np.testing.assert_array_equal(vocab.components(), [[1, 0, -1], [0, 1, 0]])


class TestBuildGraph:
    def test_one_triple_per_distinct_context(self, tiny_graph):
        # u1: p1 and p3 in the 8-16h slot, p2 in the 16-24h slot; u2 likewise.
        assert len(tiny_graph) == 6
        assert tiny_graph.n_relations == 2
        assert [tuple(p) for p in tiny_graph.relations.paths] == [(1, 0, None), (2, 0, None)]

    def test_every_triple_has_a_supporting_checkin(self, tiny_log, tiny_graph):
        slots = TimeSlotSpec(slot_hours=8)
        supported = {
            (
                tiny_graph.vocab.user_entity(r.user_id),
                tiny_graph.relations.lookup(assign_time_slot(r.timestamp, slots), 0),
                tiny_graph.vocab.poi_entity(r.poi_id),
            )
            for r in tiny_log
        }
        assert set(map(tuple, tiny_graph.triples.tolist())) == supported

    def test_triples_are_sorted_and_unique(self, tiny_graph):
        triples = tiny_graph.triples
        np.testing.assert_array_equal(triples, np.unique(triples, axis=0))

    def test_categories_split_relations(self, tiny_log):
        regions = cluster_regions([(r.lat, r.lon) for r in tiny_log], 1)
        graph = build_graph(tiny_log, TimeSlotSpec(slot_hours=8), regions, use_category=True)
        assert graph.relations.categories == ["bar", "food", "park"]
        assert graph.n_relations == 3
        assert len(graph) == 6

    def test_deterministic(self, tiny_log):
        regions = cluster_regions([(r.lat, r.lon) for r in tiny_log], 2, seed=3)
        a = build_graph(tiny_log, TimeSlotSpec(slot_hours=4), regions)
        b = build_graph(list(reversed(tiny_log)), TimeSlotSpec(slot_hours=4), regions)
        np.testing.assert_array_equal(a.triples, b.triples)
        assert a.vocab == b.vocab

    def test_empty_log(self):
        regions = cluster_regions([(0, 0)], 1)
        with pytest.raises(DataError):
            build_graph([], TimeSlotSpec(), regions)

    def test_lookups(self, tiny_graph):
        vocab = tiny_graph.vocab
        slot_two = tiny_graph.relations.lookup(2, 0)
        np.testing.assert_array_equal(tiny_graph.pois_of(slot_two), [vocab.poi_entity("p2")])
        np.testing.assert_array_equal(tiny_graph.users_of(slot_two), [0, 1])
        assert tiny_graph.relations_matching(t=1) == [tiny_graph.relations.lookup(1, 0)]
        assert tiny_graph.relations_matching(l=0) == [0, 1]
        assert tiny_graph.relations_matching(t=0) == []
        with pytest.raises(UnknownRelationError):
            tiny_graph.users_of(9)

    def test_triples_must_point_user_to_poi(self):
        with pytest.raises(DataError):
            KnowledgeGraph(EntityVocab(["a"], ["x"]), RelationVocab(1, 1), np.array([[1, 0, 0]]))

    def test_save_load(self, tmp_path, tiny_log):
        regions = cluster_regions([(r.lat, r.lon) for r in tiny_log], 1)
        graph = build_graph(tiny_log, TimeSlotSpec(slot_hours=8), regions, use_category=True)
        graph.save(str(tmp_path))
        loaded = KnowledgeGraph.load(str(tmp_path))
        np.testing.assert_array_equal(loaded.triples, graph.triples)
        assert loaded.vocab == graph.vocab
        assert loaded.relations.paths == graph.relations.paths
        assert loaded.relations.categories == graph.relations.categories
        assert (loaded.relations.n_slots, loaded.relations.n_regions) == (3, 1)


class TestNegativeSampling:
    def test_ten_thousand_draws_are_sound(self):
        graph = grouped_graph()
        rng = np.random.default_rng(0)
        picks = rng.integers(0, len(graph), size=10_000)
        positives = [tuple(graph.triples[i]) for i in picks]
        negatives = [sample_negatives(graph, pos, 1, rng)[0] for pos in positives]
        assert_sound(graph, positives, negatives)

    def test_both_sides_are_corrupted(self):
        graph = grouped_graph()
        rng = np.random.default_rng(1)
        pos = tuple(graph.triples[0])
        negatives = sample_negatives(graph, pos, 20, rng)
        assert len(set(negatives)) == 20
        assert any(n[0] != pos[0] for n in negatives)
        assert any(n[2] != pos[2] for n in negatives)

    @pytest.mark.parametrize("strategy", ["unif", "bern"])
    def test_batch_corruption_is_sound(self, strategy):
        graph = grouped_graph()
        sampler = NegativeSampler(graph, strategy=strategy)
        positives = np.repeat(graph.triples, 50, axis=0)
        negatives = sampler.corrupt(positives, np.random.default_rng(2))
        assert negatives.shape == positives.shape
        assert not sampler.is_positive(negatives).any()
        assert_sound(graph, positives.tolist(), negatives.tolist())

    def test_negatives_per_positive_layout(self):
        graph = grouped_graph()
        negatives = NegativeSampler(graph).corrupt(graph.triples[:3], np.random.default_rng(3), n_neg=4)
        assert negatives.shape == (12, 3)
        np.testing.assert_array_equal(negatives[4:8, 1], np.full(4, graph.triples[1, 1]))

    def test_bern_probabilities(self):
        # one user visits three POIs: many tails per head, so heads are corrupted more often
        graph = make_graph(2, 3, [(0, 0, 0), (0, 0, 1), (0, 0, 2)])
        sampler = NegativeSampler(graph, strategy="bern")
        assert sampler.head_prob[0] == pytest.approx(3 / 4)

    def test_side_is_redrawn_on_every_retry(self):
        # a head draw succeeds half the time (the other user), a tail draw 49 times in 50;
        # with the side redrawn per attempt, heads make up 0.25 / 0.74 of the negatives
        graph = make_graph(2, 50, [(0, 0, 0)])
        positives = np.repeat(graph.triples, 20_000, axis=0)
        negatives = NegativeSampler(graph).corrupt(positives, np.random.default_rng(4))
        head_share = float(np.mean(negatives[:, 0] != positives[:, 0]))
        assert head_share == pytest.approx(0.25 / 0.74, abs=0.02)
        assert ((negatives[:, 0] != positives[:, 0]) ^ (negatives[:, 2] != positives[:, 2])).all()

    def test_complete_graph_has_no_negative(self):
        graph = make_graph(2, 2, [(u, 0, v) for u in range(2) for v in range(2)])
        with pytest.raises(NegativeSamplingError):
            sample_negatives(graph, tuple(graph.triples[0]), 1, np.random.default_rng(0))
        with pytest.raises(NegativeSamplingError):
            NegativeSampler(graph, max_rounds=10).corrupt(graph.triples, np.random.default_rng(0))

    def test_single_user_cannot_be_corrupted(self):
        graph = make_graph(1, 3, [(0, 0, 0)])
        with pytest.raises(NegativeSamplingError):
            sample_negatives(graph, tuple(graph.triples[0]), 1, np.random.default_rng(0))
        with pytest.raises(NegativeSamplingError):
            NegativeSampler(graph)
