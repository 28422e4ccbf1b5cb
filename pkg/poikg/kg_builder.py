"""
The user-POI knowledge graph: entity and relation-path vocabularies, the
positive triple set and corrupted negatives.
"""

import os
from dataclasses import dataclass, field
from typing import Dict, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import poikg
from poikg.checkin_data import (
    CheckIn,
    RegionModel,
    TimeSlotSpec,
    assign_regions,
    assign_time_slots,
)
from poikg.errors import DataError, NegativeSamplingError, UnknownEntityError, UnknownRelationError

ENTITIES_FILE = "entities.tsv"
RELATIONS_FILE = "relations.tsv"
TRIPLES_FILE = "triples.tsv"
RELATION_SPACE_FILE = "relation_space.tsv"

# Attempts per requested negative before giving up.
RETRIES_PER_NEGATIVE = 100


class EntityVocab:
    """
    Dense indices for users and POIs.

    Users occupy entity rows ``[0, n_users)`` and POIs ``[n_users, n_users + n_pois)``,
    so the two index spaces never overlap.
    """

    def __init__(self, users: Sequence[str], pois: Sequence[str]):
        self.users: List[str] = list(users)
        self.pois: List[str] = list(pois)
        self._user_index = {key: i for i, key in enumerate(self.users)}
        self._poi_index = {key: j for j, key in enumerate(self.pois)}
        if len(self._user_index) != len(self.users) or len(self._poi_index) != len(self.pois):
            raise DataError("Entity vocabulary holds duplicate keys")

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_pois(self) -> int:
        return len(self.pois)

    @property
    def n_entities(self) -> int:
        return self.n_users + self.n_pois

    def user_index(self, key: str) -> int:
        try:
            return self._user_index[key]
        except KeyError:
            raise UnknownEntityError(f"Unknown user '{key}'") from None

    def poi_index(self, key: str) -> int:
        try:
            return self._poi_index[key]
        except KeyError:
            raise UnknownEntityError(f"Unknown POI '{key}'") from None

    def has_user(self, key: str) -> bool:
        return key in self._user_index

    def has_poi(self, key: str) -> bool:
        return key in self._poi_index

    def user_entity(self, key: str) -> int:
        return self.user_index(key)

    def poi_entity(self, key: str) -> int:
        return self.n_users + self.poi_index(key)

    def is_user_entity(self, entity: int) -> bool:
        return 0 <= entity < self.n_users

    def is_poi_entity(self, entity: int) -> bool:
        return self.n_users <= entity < self.n_entities

    def key_of(self, entity: int) -> str:
        if self.is_user_entity(entity):
            return self.users[entity]
        if self.is_poi_entity(entity):
            return self.pois[entity - self.n_users]
        raise UnknownEntityError(f"Entity index {entity} out of range")

    def __eq__(self, other) -> bool:
        return isinstance(other, EntityVocab) and self.users == other.users and self.pois == other.pois


class RelationPathId(NamedTuple):
    time_slot: int
    region: int
    category: Optional[int] = None


class RelationVocab:
    """
    Interns composed (time slot, region[, category]) relation paths.

    Component ranges are fixed up front; ids are handed out in first-seen order.
    """

    def __init__(self, n_slots: int, n_regions: int, categories: Sequence[str] = ()):
        self.n_slots = n_slots
        self.n_regions = n_regions
        self.categories: List[str] = list(categories)
        self.paths: List[RelationPathId] = []
        self._ids: Dict[RelationPathId, int] = {}

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def __len__(self) -> int:
        return len(self.paths)

    def _check(self, t: int, l: int, c: Optional[int]):
        if not 0 <= t < self.n_slots:
            raise UnknownRelationError(f"Time slot {t} outside [0, {self.n_slots})")
        if not 0 <= l < self.n_regions:
            raise UnknownRelationError(f"Region {l} outside [0, {self.n_regions})")
        if c is not None and not 0 <= c < self.n_categories:
            raise UnknownRelationError(f"Category {c} outside [0, {self.n_categories})")

    def compose(self, t: int, l: int, c: Optional[int] = None) -> int:
        """Interned id of the path ``t ∘ l (∘ c)``; equal components always give the same id."""
        t, l = int(t), int(l)
        c = None if c is None else int(c)
        self._check(t, l, c)
        path = RelationPathId(t, l, c)
        rel = self._ids.get(path)
        if rel is None:
            rel = len(self.paths)
            self.paths.append(path)
            self._ids[path] = rel
        return rel

    def lookup(self, t: int, l: int, c: Optional[int] = None) -> int:
        path = RelationPathId(int(t), int(l), None if c is None else int(c))
        try:
            return self._ids[path]
        except KeyError:
            raise UnknownRelationError(f"Relation path {tuple(path)} was never observed") from None

    def get(self, t: int, l: int, c: Optional[int] = None) -> Optional[int]:
        return self._ids.get(RelationPathId(int(t), int(l), None if c is None else int(c)))

    def __getitem__(self, rel: int) -> RelationPathId:
        if not 0 <= rel < len(self.paths):
            raise UnknownRelationError(f"Relation id {rel} out of range")
        return self.paths[rel]

    def category_index(self, category: str) -> int:
        try:
            return self.categories.index(category)
        except ValueError:
            raise UnknownRelationError(f"Unknown category '{category}'") from None

    def components(self) -> np.ndarray:
        """(n_relations, 3) table of (slot, region, category) with -1 for no category."""
        table = np.array(
            [[p.time_slot, p.region, -1 if p.category is None else p.category] for p in self.paths],
            dtype=np.int64,
        )
        return table.reshape(-1, 3)


def compose_relation_id(vocab: RelationVocab, t: int, l: int, c: Optional[int] = None) -> int:
    return vocab.compose(t, l, c)


@dataclass(eq=False)
class KnowledgeGraph:
    """
    Positive triples ``(user entity, relation id, POI entity)`` as a sorted,
    duplicate-free ``(n, 3)`` integer array.
    """

    vocab: EntityVocab
    relations: RelationVocab
    triples: np.ndarray
    _positives: set = field(init=False, repr=False)
    _users_by_rel: Dict[int, np.ndarray] = field(init=False, repr=False)
    _pois_by_rel: Dict[int, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        triples = np.asarray(self.triples, dtype=np.int64).reshape(-1, 3)
        triples = np.unique(triples, axis=0)
        heads, rels, tails = triples[:, 0], triples[:, 1], triples[:, 2]
        if len(triples):
            if heads.min() < 0 or heads.max() >= self.vocab.n_users:
                raise DataError("Triple head is not a user entity")
            if tails.min() < self.vocab.n_users or tails.max() >= self.vocab.n_entities:
                raise DataError("Triple tail is not a POI entity")
            if rels.min() < 0 or rels.max() >= len(self.relations):
                raise UnknownRelationError("Triple relation is not in the relation vocabulary")
        self.triples = triples
        self._positives = set(map(tuple, triples.tolist()))
        self._users_by_rel = {}
        self._pois_by_rel = {}
        if len(triples):
            frame = pd.DataFrame(triples, columns=["h", "r", "t"])
            for rel, group in frame.groupby("r", sort=True):
                self._users_by_rel[int(rel)] = np.unique(group["h"].to_numpy())
                self._pois_by_rel[int(rel)] = np.unique(group["t"].to_numpy())

    def __len__(self) -> int:
        return len(self.triples)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def contains(self, head: int, rel: int, tail: int) -> bool:
        return (int(head), int(rel), int(tail)) in self._positives

    def users_of(self, rel: int) -> np.ndarray:
        """User entities with at least one triple under ``rel``."""
        self.relations[rel]  # raises for unknown ids
        return self._users_by_rel.get(int(rel), np.empty(0, dtype=np.int64))

    def pois_of(self, rel: int) -> np.ndarray:
        """POI entities with at least one triple under ``rel``."""
        self.relations[rel]  # raises for unknown ids
        return self._pois_by_rel.get(int(rel), np.empty(0, dtype=np.int64))

    def relations_matching(self, t: Optional[int] = None, l: Optional[int] = None,
                           c: Optional[int] = None) -> List[int]:
        """Observed relation ids agreeing with every component that is given."""
        return [
            rel
            for rel, path in enumerate(self.relations.paths)
            if (t is None or path.time_slot == t)
               and (l is None or path.region == l)
               and (c is None or path.category == c)
        ]

    def save(self, out_dir: str):
        os.makedirs(out_dir, exist_ok=True)
        entities = pd.DataFrame(
            {
                "index": np.arange(self.vocab.n_entities),
                "type": ["user"] * self.vocab.n_users + ["poi"] * self.vocab.n_pois,
                "key": self.vocab.users + self.vocab.pois,
            }
        )
        entities.to_csv(os.path.join(out_dir, ENTITIES_FILE), sep="\t", index=False)
        relations = pd.DataFrame(
            {
                "index": np.arange(len(self.relations)),
                "slot": [p.time_slot for p in self.relations.paths],
                "region": [p.region for p in self.relations.paths],
                "category": [
                    "" if p.category is None else self.relations.categories[p.category]
                    for p in self.relations.paths
                ],
            }
        )
        relations.to_csv(os.path.join(out_dir, RELATIONS_FILE), sep="\t", index=False)
        meta = pd.DataFrame(
            {"n_slots": [self.relations.n_slots], "n_regions": [self.relations.n_regions]}
        )
        meta.to_csv(os.path.join(out_dir, RELATION_SPACE_FILE), sep="\t", index=False)
        pd.DataFrame(self.triples, columns=["head", "relation", "tail"]).to_csv(
            os.path.join(out_dir, TRIPLES_FILE), sep="\t", index=False
        )

    @classmethod
    def load(cls, out_dir: str) -> "KnowledgeGraph":
        entities = pd.read_csv(
            os.path.join(out_dir, ENTITIES_FILE), sep="\t", dtype={"key": str}, keep_default_na=False
        )
        vocab = EntityVocab(
            users=entities.loc[entities["type"] == "user", "key"].tolist(),
            pois=entities.loc[entities["type"] == "poi", "key"].tolist(),
        )
        relations = pd.read_csv(
            os.path.join(out_dir, RELATIONS_FILE), sep="\t", dtype={"category": str}, keep_default_na=False
        )
        meta = pd.read_csv(os.path.join(out_dir, RELATION_SPACE_FILE), sep="\t")
        categories = sorted({c for c in relations["category"] if c})
        rel_vocab = RelationVocab(
            n_slots=int(meta["n_slots"].iloc[0]),
            n_regions=int(meta["n_regions"].iloc[0]),
            categories=categories,
        )
        for slot, region, category in relations[["slot", "region", "category"]].itertuples(index=False):
            rel_vocab.compose(slot, region, categories.index(category) if category else None)
        triples = pd.read_csv(os.path.join(out_dir, TRIPLES_FILE), sep="\t").to_numpy(dtype=np.int64)
        return cls(vocab=vocab, relations=rel_vocab, triples=triples)


def build_graph(
        train: Sequence[CheckIn],
        slots: TimeSlotSpec,
        regions: RegionModel,
        use_category: bool = False,
        tz_offset: float = 0.0,
) -> KnowledgeGraph:
    """
    One positive triple per distinct (user, slot ∘ region [∘ category], POI) seen in ``train``.

    Vocabularies are sorted by key and relation ids follow the sorted order of
    observed paths, so equal inputs give equal graphs.
    """
    if not train:
        raise DataError("Cannot build a graph from an empty training log")
    vocab = EntityVocab(
        users=sorted({r.user_id for r in train}),
        pois=sorted({r.poi_id for r in train}),
    )
    categories = sorted({r.category for r in train if r.category}) if use_category else []
    category_index = {c: i for i, c in enumerate(categories)}

    slot_ids = assign_time_slots([r.timestamp for r in train], slots, tz_offset)
    region_ids = assign_regions(train, regions)
    if use_category:
        cat_ids = np.array([category_index.get(r.category, -1) for r in train], dtype=np.int64)
    else:
        cat_ids = np.full(len(train), -1, dtype=np.int64)

    paths = np.unique(np.column_stack([slot_ids, region_ids, cat_ids]), axis=0)
    rel_vocab = RelationVocab(slots.slots_per_day, regions.region_count, categories)
    for t, l, c in paths:
        rel_vocab.compose(t, l, None if c < 0 else c)

    rel_ids = np.array(
        [rel_vocab.lookup(t, l, None if c < 0 else c) for t, l, c in zip(slot_ids, region_ids, cat_ids)],
        dtype=np.int64,
    )
    heads = np.array([vocab.user_entity(r.user_id) for r in train], dtype=np.int64)
    tails = np.array([vocab.poi_entity(r.poi_id) for r in train], dtype=np.int64)
    graph = KnowledgeGraph(vocab=vocab, relations=rel_vocab, triples=np.column_stack([heads, rel_ids, tails]))
    poikg.logging.info(
        f"Graph: {vocab.n_users} users, {vocab.n_pois} POIs, {len(rel_vocab)} relations, {len(graph)} triples"
    )
    return graph


def _legal_corruptions(graph: KnowledgeGraph, head: int, rel: int, tail: int) -> List[Tuple[int, int, int]]:
    users = range(graph.vocab.n_users)
    pois = range(graph.vocab.n_users, graph.vocab.n_entities)
    heads = [(h, rel, tail) for h in users if h != head and not graph.contains(h, rel, tail)]
    tails = [(head, rel, t) for t in pois if t != tail and not graph.contains(head, rel, t)]
    return heads + tails


def sample_negatives(
        graph: KnowledgeGraph,
        positive: Tuple[int, int, int],
        n: int,
        rng: np.random.Generator,
) -> List[Tuple[int, int, int]]:
    """
    Draws ``n`` distinct corrupted triples for ``positive``.

    Each negative replaces exactly one side, chosen uniformly: heads are drawn
    from users, tails from POIs, and no negative is a positive triple.

    Raises:
        NegativeSamplingError: if ``n`` distinct negatives are not found within
            the retry budget.
    """
    head, rel, tail = (int(x) for x in positive)
    vocab = graph.vocab
    if vocab.n_users < 2 or vocab.n_pois < 2:
        raise NegativeSamplingError("Corruption needs at least two users and two POIs")

    negatives: List[Tuple[int, int, int]] = []
    seen = set()
    budget = RETRIES_PER_NEGATIVE * max(n, 1)
    while len(negatives) < n and budget > 0:
        budget -= 1
        if rng.random() < 0.5:
            candidate = (int(rng.integers(0, vocab.n_users)), rel, tail)
        else:
            candidate = (head, rel, int(rng.integers(vocab.n_users, vocab.n_entities)))
        if candidate in seen or candidate == (head, rel, tail) or graph.contains(*candidate):
            continue
        seen.add(candidate)
        negatives.append(candidate)
    if len(negatives) < n:
        legal = _legal_corruptions(graph, head, rel, tail)
        raise NegativeSamplingError(
            f"Found {len(negatives)} of {n} negatives for {positive}; {len(legal)} legal corruptions exist"
        )
    return negatives


class NegativeSampler:
    """
    Corrupts whole batches of positives at once.

    With ``strategy="bern"`` the head is replaced with probability
    ``tph / (tph + hpt)`` of the triple's relation, otherwise both sides are
    equally likely. Rejected draws are redrawn until ``max_rounds`` runs out.
    """

    def __init__(
            self,
            graph: KnowledgeGraph,
            strategy: Literal["unif", "bern"] = "unif",
            max_rounds: int = RETRIES_PER_NEGATIVE,
    ):
        if graph.vocab.n_users < 2 or graph.vocab.n_pois < 2:
            raise NegativeSamplingError("Corruption needs at least two users and two POIs")
        if strategy not in ("unif", "bern"):
            raise ValueError(f"Unknown corruption strategy '{strategy}'")
        self.graph = graph
        self.strategy = strategy
        self.max_rounds = max_rounds
        self._n_ent = graph.vocab.n_entities
        self._n_rel = max(graph.n_relations, 1)
        self._keys = np.sort(self._encode(graph.triples)) if len(graph) else np.empty(0, dtype=np.int64)
        self.head_prob = self._head_probabilities()

    def _encode(self, triples: np.ndarray) -> np.ndarray:
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        return (triples[:, 0] * self._n_rel + triples[:, 1]) * self._n_ent + triples[:, 2]

    def is_positive(self, triples: np.ndarray) -> np.ndarray:
        keys = self._encode(triples)
        if not len(self._keys):
            return np.zeros(len(keys), dtype=bool)
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, len(self._keys) - 1)
        return self._keys[pos] == keys

    def _head_probabilities(self) -> np.ndarray:
        probs = np.full(self._n_rel, 0.5)
        if self.strategy != "bern" or not len(self.graph):
            return probs
        frame = pd.DataFrame(self.graph.triples, columns=["h", "r", "t"])
        tph = frame.groupby(["r", "h"]).size().groupby("r").mean()
        hpt = frame.groupby(["r", "t"]).size().groupby("r").mean()
        stats = pd.concat([tph.rename("tph"), hpt.rename("hpt")], axis=1)
        probs[stats.index.to_numpy()] = (stats["tph"] / (stats["tph"] + stats["hpt"])).to_numpy()
        return probs

    def corrupt(self, positives: np.ndarray, rng: np.random.Generator, n_neg: int = 1) -> np.ndarray:
        """
        Returns ``(len(positives) * n_neg, 3)`` negatives; row ``i * n_neg + j`` corrupts positive ``i``.
        """
        positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
        source = np.repeat(positives, n_neg, axis=0)
        negatives = source.copy()
        n_users = self.graph.vocab.n_users
        corrupt_head = rng.random(len(source)) < self.head_prob[source[:, 1]]

        pending = np.arange(len(source))
        for round_ in range(self.max_rounds):
            if not len(pending):
                break
            if round_:
                # every retry draws its side afresh
                corrupt_head[pending] = rng.random(len(pending)) < self.head_prob[source[pending, 1]]
            heads = corrupt_head[pending]
            draws_h = rng.integers(0, n_users, size=len(pending))
            draws_t = rng.integers(n_users, self._n_ent, size=len(pending))
            negatives[pending, 0] = np.where(heads, draws_h, source[pending, 0])
            negatives[pending, 2] = np.where(heads, source[pending, 2], draws_t)
            bad = self.is_positive(negatives[pending])
            pending = pending[bad]
        if len(pending):
            raise NegativeSamplingError(
                f"{len(pending)} positives could not be corrupted in {self.max_rounds} rounds"
            )
        return negatives
