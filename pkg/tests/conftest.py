import numpy as np
import pytest

import poikg
from poikg.checkin_data import CheckIn, split_by_date
from poikg.kg_builder import EntityVocab, KnowledgeGraph, RelationVocab
from poikg.recommender_eval import PipelineConfig, SyntheticSpec, fit_pipeline, generate_synthetic

DAY = 86400
# 2011-03-13 00:00:00 UTC
T0 = 1299974400


def checkin(user, poi, lat=0.0, lon=0.0, ts=T0 + 3600, category=None):
    return CheckIn(user, poi, float(lat), float(lon), float(ts), category)


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def make_graph(n_users, n_pois, triples, n_slots=1, n_regions=1, paths=((0, 0),)):
    """Graph over ``u0..`` / ``p0..`` keys; ``triples`` use user and POI positions, not entity indices."""
    vocab = EntityVocab([f"u{i}" for i in range(n_users)], [f"p{j}" for j in range(n_pois)])
    relations = RelationVocab(n_slots, n_regions)
    for t, l in paths:
        relations.compose(t, l)
    entity = np.array([[u, r, n_users + v] for u, r, v in triples], dtype=np.int64).reshape(-1, 3)
    return KnowledgeGraph(vocab=vocab, relations=relations, triples=entity)


def grouped_graph(groups=4, per_group=5, n_relations=2):
    """Users of group g visit every POI of group g under every relation: 200 triples by default."""
    n = groups * per_group
    triples = [
        (u, r, v)
        for r in range(n_relations)
        for u in range(n)
        for v in range(n)
        if u % groups == v % groups
    ]
    return make_graph(n, n, triples, n_slots=n_relations, paths=[(r, 0) for r in range(n_relations)])


@pytest.fixture
def tiny_log():
    """Two users, three POIs, ten days."""
    return [
        checkin("u1", "p1", 40.70, -74.00, T0 + 0 * DAY + 9 * 3600, "food"),
        checkin("u1", "p1", 40.70, -74.00, T0 + 1 * DAY + 9 * 3600, "food"),
        checkin("u1", "p2", 40.72, -74.01, T0 + 2 * DAY + 19 * 3600, "bar"),
        checkin("u2", "p2", 40.72, -74.01, T0 + 3 * DAY + 20 * 3600, "bar"),
        checkin("u2", "p3", 40.60, -73.90, T0 + 4 * DAY + 13 * 3600, "park"),
        checkin("u1", "p3", 40.60, -73.90, T0 + 5 * DAY + 14 * 3600, "park"),
        checkin("u2", "p1", 40.70, -74.00, T0 + 6 * DAY + 8 * 3600, "food"),
        checkin("u2", "p2", 40.72, -74.01, T0 + 7 * DAY + 21 * 3600, "bar"),
        checkin("u1", "p2", 40.72, -74.01, T0 + 8 * DAY + 18 * 3600, "bar"),
        checkin("u2", "p3", 40.60, -73.90, T0 + 9 * DAY + 12 * 3600, "park"),
    ]


@pytest.fixture(scope="session")
def planted_spec():
    return SyntheticSpec(users=50, pois=100, regions=4, slots=3, strength=0.9, seed=0)


@pytest.fixture(scope="session")
def planted_split(planted_spec):
    return split_by_date(generate_synthetic(planted_spec), 0.8)


@pytest.fixture(scope="session")
def fast_config():
    """Small embeddings and few epochs; evaluation keeps repeat visits."""
    return PipelineConfig().replace(
        data={"slot_hours": 8, "region_k": 4},
        transr={"dim_d": 16, "dim_k": 16, "learning_rate": 0.01, "epochs": 50},
        mf={"k": 10, "epochs": 100},
        eval={"exclude_visited": False},
    )


@pytest.fixture(scope="session")
def planted_artifacts(planted_split, fast_config):
    return fit_pipeline(planted_split.train, fast_config)


@pytest.fixture(autouse=True, scope="session")
def _quiet_console():
    poikg.turn_console_off()
    yield
    poikg.turn_console_on()
