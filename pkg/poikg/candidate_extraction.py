"""
Candidate extraction: rank user/POI pairs per relation by TransR score, keep
the best fraction, and drop POIs too far from the user's home location.
"""

import argparse
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import field_validator

import poikg
from poikg.checkin_data import HomeLocation
from poikg.config import ConfigSection
from poikg.errors import EmptyCandidateSetError, MissingCoordinatesError
from poikg.kg_builder import KnowledgeGraph
from poikg.transr import TransRModel, score_pairs

EARTH_RADIUS_KM = 6371.0088
KM_PER_DEGREE = math.pi * EARTH_RADIUS_KM / 180.0


class ExtractionConfig(ConfigSection):
    section = "extract"

    theta_keep: float = 0.5
    theta_d_km: float = 50.0
    sigma_multiplier: float = 1.0
    max_candidates: int = 100000

    @field_validator("theta_keep")
    @classmethod
    def _keep_fraction(cls, value: float) -> float:
        if not 0.0 < value <= 1.0:
            raise ValueError("theta_keep must lie in (0, 1]")
        return value

    @field_validator("theta_d_km")
    @classmethod
    def _radius(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("theta_d_km must be > 0")
        return value

    @field_validator("sigma_multiplier")
    @classmethod
    def _multiplier(cls, value: float) -> float:
        if value < 0:
            raise ValueError("sigma_multiplier must be >= 0")
        return value

    @field_validator("max_candidates")
    @classmethod
    def _cap(cls, value: int) -> int:
        if value < 1:
            raise ValueError("max_candidates must be >= 1")
        return value

    @classmethod
    def add_args(cls, parser: argparse.ArgumentParser, prefix: Optional[str] = None):
        prefix_str = "" if prefix is None else prefix + "."
        try:
            parser.add_argument(
                "--" + prefix_str + "extract.theta_keep",
                type=float,
                default=0.5,
                help="Fraction of best-scored pairs kept per relation.",
            )
            parser.add_argument(
                "--" + prefix_str + "extract.theta_d_km",
                type=float,
                default=50.0,
                help="Base radius around the home location, in km. 'inf' disables the filter.",
            )
            parser.add_argument(
                "--" + prefix_str + "extract.sigma_multiplier",
                type=float,
                default=1.0,
                help="Radius inflation per unit of home-location spread.",
            )
            parser.add_argument(
                "--" + prefix_str + "extract.max_candidates",
                type=int,
                default=100000,
                help="Cap on score-pruned pairs per relation, applied before the distance filter.",
            )
        except argparse.ArgumentError:
            # re-parsing arguments.
            pass


class ScoredPair(NamedTuple):
    user: int
    poi: int
    score: float
    distance_km: float = float("nan")
    relation: int = -1


@dataclass
class CandidateSet:
    """
    Users and POIs that survive extraction, in order of their best pair score.

    ``user_set`` holds user entity indices and ``poi_set`` POI entity indices.
    """

    user_set: List[int]
    poi_set: List[int]
    pairs: List[ScoredPair]

    def __post_init__(self):
        self._user_pos = {u: i for i, u in enumerate(self.user_set)}
        self._poi_pos = {v: j for j, v in enumerate(self.poi_set)}

    def user_position(self, user: int) -> Optional[int]:
        return self._user_pos.get(user)

    def poi_position(self, poi: int) -> Optional[int]:
        return self._poi_pos.get(poi)

    def pois_for(self, relations: Iterable[int]) -> List[int]:
        wanted = set(relations)
        return sorted({p.poi for p in self.pairs if p.relation in wanted})

    def to_frame(self, graph: KnowledgeGraph) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "user_key": [graph.vocab.key_of(p.user) for p in self.pairs],
                "poi_key": [graph.vocab.key_of(p.poi) for p in self.pairs],
                "score": [p.score for p in self.pairs],
                "distance_km": [p.distance_km for p in self.pairs],
                "relation": [p.relation for p in self.pairs],
            },
            columns=["user_key", "poi_key", "score", "distance_km", "relation"],
        )

    def save(self, path: str, graph: KnowledgeGraph):
        self.to_frame(graph).to_csv(path, sep="\t", index=False, float_format="%.17g")

    @classmethod
    def load(cls, path: str, graph: KnowledgeGraph) -> "CandidateSet":
        frame = pd.read_csv(path, sep="\t", dtype={"user_key": str, "poi_key": str}, keep_default_na=False)
        pairs = [
            ScoredPair(
                graph.vocab.user_entity(u), graph.vocab.poi_entity(v), float(s), float(dist), int(rel)
            )
            for u, v, s, dist, rel in frame[["user_key", "poi_key", "score", "distance_km", "relation"]].itertuples(
                index=False
            )
        ]
        return _collect(pairs)


def haversine_km(a, b) -> np.ndarray:
    """Great-circle distance in km between (lat, lon) points in degrees; broadcasts over leading axes."""
    a = np.radians(np.asarray(a, dtype=float))
    b = np.radians(np.asarray(b, dtype=float))
    dlat = b[..., 0] - a[..., 0]
    dlon = b[..., 1] - a[..., 1]
    h = np.sin(dlat / 2.0) ** 2 + np.cos(a[..., 0]) * np.cos(b[..., 0]) * np.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def rank_pairs(model: TransRModel, graph: KnowledgeGraph, rel: int, descending: bool = False) -> List[ScoredPair]:
    """
    Scores every (user, POI) pair seen under ``rel`` and sorts them.

    Ascending order puts the most plausible pair first; ties go by
    (user, POI) index either way.
    """
    users = graph.users_of(rel)
    pois = graph.pois_of(rel)
    if not len(users) or not len(pois):
        return []
    scores = score_pairs(model, rel, users, pois)
    uu = np.repeat(users, len(pois))
    vv = np.tile(pois, len(users))
    flat = scores.reshape(-1)
    key = -flat if descending else flat
    order = np.lexsort((vv, uu, key))
    return [ScoredPair(int(uu[i]), int(vv[i]), float(flat[i]), float("nan"), int(rel)) for i in order]


def prune_by_score(ranked: Sequence[ScoredPair], theta: float) -> List[ScoredPair]:
    """Keeps the first ``ceil(theta * n)`` pairs."""
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    keep = math.ceil(theta * len(ranked) - 1e-12)
    return list(ranked[:keep])


def filter_by_distance(
        pairs: Sequence[ScoredPair],
        homes: Mapping[int, HomeLocation],
        pois: Mapping[int, np.ndarray],
        cfg: ExtractionConfig,
) -> CandidateSet:
    """
    Keeps ``(u, v)`` iff ``haversine(mu_u, v) <= theta_d + sigma_multiplier * spread_u``.

    ``homes`` and ``pois`` are keyed by entity index. The spread is
    ``sqrt(trace(sigma_u))`` converted from degrees to km. Order is kept. Only
    the first ``max_candidates`` input pairs are considered, so a smaller
    ``theta_d`` always keeps a subset.

    Raises:
        MissingCoordinatesError: if a user has no home or a POI no coordinates.
    """
    return _collect(_within_radius(list(pairs)[: cfg.max_candidates], homes, pois, cfg))


def _within_radius(pairs, homes, pois, cfg: ExtractionConfig) -> List[ScoredPair]:
    if not pairs:
        return []
    users = np.array([p.user for p in pairs])
    tails = np.array([p.poi for p in pairs])
    missing_users = {u for u in set(users.tolist()) if u not in homes}
    if missing_users:
        raise MissingCoordinatesError(f"No home location for users {sorted(missing_users)[:5]}")
    missing_pois = {v for v in set(tails.tolist()) if v not in pois}
    if missing_pois:
        raise MissingCoordinatesError(f"No coordinates for POIs {sorted(missing_pois)[:5]}")

    mu = np.array([homes[u].mu for u in users], dtype=float)
    coords = np.array([pois[v] for v in tails], dtype=float)
    spread_km = np.array([homes[u].spread for u in users]) * KM_PER_DEGREE
    distance = haversine_km(mu, coords)
    radius = cfg.theta_d_km + cfg.sigma_multiplier * spread_km
    keep = distance <= radius
    return [p._replace(distance_km=float(d)) for p, d, k in zip(pairs, distance, keep) if k]


def _collect(pairs: Sequence[ScoredPair]) -> CandidateSet:
    """Candidate sets ordered by each endpoint's best score, ties by index."""
    best_user: Dict[int, float] = {}
    best_poi: Dict[int, float] = {}
    for p in pairs:
        best_user[p.user] = min(best_user.get(p.user, math.inf), p.score)
        best_poi[p.poi] = min(best_poi.get(p.poi, math.inf), p.score)
    return CandidateSet(
        user_set=sorted(best_user, key=lambda u: (best_user[u], u)),
        poi_set=sorted(best_poi, key=lambda v: (best_poi[v], v)),
        pairs=list(pairs),
    )


def extract(
        model: TransRModel,
        graph: KnowledgeGraph,
        homes: Mapping[int, HomeLocation],
        pois: Mapping[int, np.ndarray],
        cfg: ExtractionConfig,
        relations: Optional[Iterable[int]] = None,
) -> CandidateSet:
    """
    ``rank_pairs -> prune_by_score -> filter_by_distance`` for every relation
    (or only ``relations``), with the candidate sets as unions of the survivors.

    Raises:
        EmptyCandidateSetError: if no pair survives.
    """
    rels = range(graph.n_relations) if relations is None else relations
    survivors: List[ScoredPair] = []
    for rel in rels:
        ranked = rank_pairs(model, graph, rel)
        pruned = prune_by_score(ranked, cfg.theta_keep)
        kept = _within_radius(pruned[: cfg.max_candidates], homes, pois, cfg)
        poikg.logging.trace(f"relation {rel}: {len(ranked)} ranked, {len(pruned)} pruned, {len(kept)} kept")
        survivors.extend(kept)
    if not survivors:
        raise EmptyCandidateSetError("No user/POI pair survived extraction; loosen theta_keep or theta_d_km")
    candidates = _collect(survivors)
    poikg.logging.info(
        f"Extracted {len(candidates.pairs)} pairs: {len(candidates.user_set)} users, {len(candidates.poi_set)} POIs"
    )
    return candidates


def entity_homes(graph: KnowledgeGraph, homes: Mapping[str, HomeLocation]) -> Dict[int, HomeLocation]:
    """Re-keys user-keyed homes by user entity index."""
    return {graph.vocab.user_entity(key): home for key, home in homes.items() if graph.vocab.has_user(key)}


def entity_coordinates(graph: KnowledgeGraph, coords: Mapping[str, np.ndarray]) -> Dict[int, np.ndarray]:
    """Re-keys POI-keyed coordinates by POI entity index."""
    return {graph.vocab.poi_entity(key): xy for key, xy in coords.items() if graph.vocab.has_poi(key)}
