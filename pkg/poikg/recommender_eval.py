"""
Query answering, ranking metrics and the experiment drivers.
"""

import argparse
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

import poikg
from poikg.candidate_extraction import (
    CandidateSet,
    ExtractionConfig,
    entity_coordinates,
    entity_homes,
    extract,
)
from poikg.checkin_data import (
    SECONDS_PER_DAY,
    SECONDS_PER_HOUR,
    CheckIn,
    DataConfig,
    HomeLocation,
    RegionModel,
    SplitDataset,
    assign_time_slot,
    fit_home_locations,
    fit_regions,
    poi_coordinates,
)
from poikg.combined_mf import FactorModel, MFConfig, combine_scores, fit_combined_mf
from poikg.config import ConfigSection
from poikg.errors import (
    ConfigError,
    EmptyCandidatePoolError,
    PoikgError,
    RegionError,
    UnknownEntityError,
)
from poikg.kg_builder import KnowledgeGraph, build_graph
from poikg.transr import TrainConfig, TransRModel, train

SWEEP_KS = (1, 10, 20)
SPARSITY_K = 10


def parse_int_list(value) -> Tuple[int, ...]:
    """``"1,5,10"`` or a sequence of ints."""
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
        try:
            return tuple(int(p) for p in parts)
        except ValueError:
            raise ConfigError(f"Expected a comma-separated list of integers, got '{value}'") from None
    return tuple(int(v) for v in value)


def parse_float_list(value) -> Tuple[float, ...]:
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"Expected a comma-separated list of numbers, got '{value}'") from None
    return tuple(float(v) for v in value)


class EvalConfig(ConfigSection):
    section = "eval"

    ks: Tuple[int, ...] = (1, 5, 10, 20)
    exclude_visited: bool = True

    @field_validator("ks", mode="before")
    @classmethod
    def _parse_ks(cls, value):
        ks = parse_int_list(value)
        if not ks or min(ks) < 1:
            raise ValueError("every cutoff k must be >= 1")
        return tuple(sorted(set(ks)))

    @classmethod
    def add_args(cls, parser: argparse.ArgumentParser, prefix: Optional[str] = None):
        prefix_str = "" if prefix is None else prefix + "."
        try:
            parser.add_argument(
                "--" + prefix_str + "eval.ks",
                type=str,
                default="1,5,10,20",
                help="Comma-separated cutoffs k.",
            )
            parser.add_argument(
                "--" + prefix_str + "eval.exclude_visited",
                action=argparse.BooleanOptionalAction,
                default=True,
                help="Drop POIs the user visited in training from recommendations and ground truth.",
            )
        except argparse.ArgumentError:
            # re-parsing arguments.
            pass


class PipelineConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    data: DataConfig = DataConfig()
    transr: TrainConfig = TrainConfig()
    extract: ExtractionConfig = ExtractionConfig()
    mf: MFConfig = MFConfig()
    eval: EvalConfig = EvalConfig()

    @classmethod
    def from_config(cls, config, seed: Optional[int] = None) -> "PipelineConfig":
        """Typed view of a :class:`~poikg.config.Config`; ``seed`` overrides every section's seed."""
        cfg = cls(
            data=DataConfig.from_config(config),
            transr=TrainConfig.from_config(config),
            extract=ExtractionConfig.from_config(config),
            mf=MFConfig.from_config(config),
            eval=EvalConfig.from_config(config),
        )
        return cfg if seed is None else cfg.with_seed(seed)

    def with_seed(self, seed: int) -> "PipelineConfig":
        return self.model_copy(
            update={
                "data": self.data.model_copy(update={"kmeans_seed": seed}),
                "transr": self.transr.model_copy(update={"seed": seed}),
                "mf": self.mf.model_copy(update={"seed": seed}),
            }
        )

    def replace(self, **sections) -> "PipelineConfig":
        """Copy with per-section field updates, e.g. ``replace(transr={"dim_d": 50})``; values are validated."""
        update = {}
        for name, fields in sections.items():
            section = getattr(self, name)
            update[name] = type(section).from_config(section.model_dump(), **fields)
        return self.model_copy(update=update)


@dataclass(frozen=True)
class Query:
    user: str
    lat: float
    lon: float
    timestamp: float
    category: Optional[str] = None

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"Query coordinates out of range: ({self.lat}, {self.lon})")


@dataclass
class RecommendationList:
    query: Query
    items: List[Tuple[str, float]] = field(default_factory=list)

    @property
    def pois(self) -> List[str]:
        return [poi for poi, _ in self.items]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "rank": np.arange(1, len(self.items) + 1),
                "poi_key": self.pois,
                "score": [score for _, score in self.items],
            },
            columns=["rank", "poi_key", "score"],
        )


@dataclass
class MetricsReport:
    k: int
    prec: float
    rec: float
    f1: float
    mean_rank: float = float("nan")
    per_user: pd.DataFrame = field(default_factory=pd.DataFrame)

    @property
    def n_users(self) -> int:
        return len(self.per_user)


@dataclass
class PipelineArtifacts:
    """Everything a fitted pipeline needs to answer queries."""

    cfg: PipelineConfig
    train: List[CheckIn]
    regions: RegionModel
    graph: KnowledgeGraph
    transr: TransRModel
    loss_trace: List[float]
    homes: Dict[str, HomeLocation]
    poi_coords: Dict[str, np.ndarray]
    candidates: CandidateSet
    factors: FactorModel
    st_trace: List[float] = field(default_factory=list)
    pref_trace: List[float] = field(default_factory=list)
    visited: Dict[str, Set[str]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.visited:
            self.visited = visited_pois(self.train)


def visited_pois(records: Sequence[CheckIn]) -> Dict[str, Set[str]]:
    visited: Dict[str, Set[str]] = {}
    for r in records:
        visited.setdefault(r.user_id, set()).add(r.poi_id)
    return visited


def fit_pipeline(train_records: Sequence[CheckIn], cfg: PipelineConfig) -> PipelineArtifacts:
    """Regions, graph, TransR, extraction and both factorizations on one training log."""
    train_records = list(train_records)
    regions = fit_regions(train_records, cfg.data)
    graph = build_graph(train_records, cfg.data.slots, regions, cfg.data.use_category, cfg.data.tz_offset)
    embedded = train(graph, cfg.transr)
    homes = fit_home_locations(train_records)
    coords = poi_coordinates(train_records)
    candidates = extract(
        embedded.model, graph, entity_homes(graph, homes), entity_coordinates(graph, coords), cfg.extract
    )
    combined = fit_combined_mf(train_records, graph, candidates, cfg.mf)
    return PipelineArtifacts(
        cfg=cfg,
        train=train_records,
        regions=regions,
        graph=graph,
        transr=embedded.model,
        loss_trace=embedded.loss_trace,
        homes=homes,
        poi_coords=coords,
        candidates=candidates,
        factors=combined.model,
        st_trace=combined.st_trace,
        pref_trace=combined.pref_trace,
    )


def _query_relations(q: Query, artifacts: PipelineArtifacts) -> List[List[int]]:
    """Relation contexts for a query, narrowest first."""
    graph = artifacts.graph
    data = artifacts.cfg.data
    slot = assign_time_slot(q.timestamp, data.slots, data.tz_offset)
    try:
        region = artifacts.regions.assign(q.lat, q.lon)
    except RegionError:
        region = None
    contexts = []
    if data.use_category and q.category and q.category in graph.relations.categories:
        category = graph.relations.category_index(q.category)
        contexts.append(graph.relations_matching(slot, region, category))
    contexts.append(graph.relations_matching(slot, region))
    if region is not None:
        contexts.append(graph.relations_matching(None, region))
    return contexts


def candidate_pool(q: Query, artifacts: PipelineArtifacts, exclude_visited: bool = True) -> List[int]:
    """
    Candidate POI entities for a query.

    Starts from the candidates under relations matching the query's slot and
    region (and category), widens to the region, then to every candidate POI.
    """
    visited = artifacts.visited.get(q.user, set()) if exclude_visited else set()
    vocab = artifacts.graph.vocab
    blocked = {vocab.poi_entity(p) for p in visited if vocab.has_poi(p)}
    for rels in _query_relations(q, artifacts):
        pool = [v for v in artifacts.candidates.pois_for(rels) if v not in blocked]
        if pool:
            return pool
    return sorted(v for v in artifacts.candidates.poi_set if v not in blocked)


def rank_pool(q: Query, artifacts: PipelineArtifacts, exclude_visited: bool = True) -> List[Tuple[str, float]]:
    """Every pool POI by descending combined score, ties by POI index."""
    vocab = artifacts.graph.vocab
    user = vocab.user_index(q.user)
    pool = candidate_pool(q, artifacts, exclude_visited)
    if not pool:
        raise EmptyCandidatePoolError(f"No POI left to rank for user '{q.user}'")
    poi_index = np.asarray(pool, dtype=np.int64) - vocab.n_users
    scores = combine_scores(user, poi_index, artifacts.factors)
    order = np.lexsort((poi_index, -scores))
    return [(vocab.pois[poi_index[i]], float(scores[i])) for i in order]


def recommend_topk(q: Query, k: int, artifacts: PipelineArtifacts,
                   exclude_visited: Optional[bool] = None) -> RecommendationList:
    """
    Top-``k`` POIs for a query by combined score.

    Raises:
        UnknownEntityError: if the user is not in the graph.
        EmptyCandidatePoolError: if no POI is left to rank.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    artifacts.graph.vocab.user_index(q.user)
    if k == 0:
        return RecommendationList(query=q)
    if exclude_visited is None:
        exclude_visited = artifacts.cfg.eval.exclude_visited
    return RecommendationList(query=q, items=rank_pool(q, artifacts, exclude_visited)[:k])


def _check_metric_inputs(truth: Mapping[str, Set[str]], k: int):
    if k <= 0:
        raise ValueError(f"k must be >= 1, got {k}")
    if not truth:
        raise ValueError("No evaluated users")
    empty = [u for u, pois in truth.items() if not pois]
    if empty:
        raise ValueError(f"Users with empty ground truth: {empty[:5]}")


def _hits(recs: Sequence[str], truth: Set[str], k: int) -> int:
    return len(set(list(recs)[:k]) & truth)


def precision_at_k(recs: Mapping[str, Sequence[str]], truth: Mapping[str, Set[str]], k: int) -> float:
    """Mean over users in ``truth`` of ``|top-k ∩ truth| / k``."""
    _check_metric_inputs(truth, k)
    return float(np.mean([_hits(recs.get(u, ()), t, k) / k for u, t in truth.items()]))


def recall_at_k(recs: Mapping[str, Sequence[str]], truth: Mapping[str, Set[str]], k: int) -> float:
    """Mean over users in ``truth`` of ``|top-k ∩ truth| / |truth|``."""
    _check_metric_inputs(truth, k)
    return float(np.mean([_hits(recs.get(u, ()), t, k) / len(t) for u, t in truth.items()]))


def f1_at_k(prec: float, rec: float) -> float:
    if not (0.0 <= prec <= 1.0 and 0.0 <= rec <= 1.0):
        raise ValueError(f"precision and recall must lie in [0, 1], got {prec}, {rec}")
    if prec + rec == 0:
        return 0.0
    return 2.0 * prec * rec / (prec + rec)


def random_hit_probability(n_pois: int, n_truth: int, k: int) -> float:
    """Chance that a uniformly random top-``k`` list hits at least one of ``n_truth`` POIs."""
    k = min(k, n_pois)
    miss = 1.0
    for i in range(k):
        miss *= max(n_pois - n_truth - i, 0) / (n_pois - i)
    return 1.0 - miss


def random_baseline_precision(truth: Mapping[str, Set[str]], n_pois: int, k: int) -> float:
    """Expected Prec@k of a uniformly random ranking over ``n_pois`` POIs (hypergeometric mean)."""
    _check_metric_inputs(truth, k)
    return float(np.mean([min(k, n_pois) * len(t) / n_pois / k for t in truth.values()]))


def build_truth(train: Sequence[CheckIn], test: Sequence[CheckIn],
                exclude_visited: bool = True) -> Dict[str, Set[str]]:
    """
    Distinct test POIs of every user with both train and test check-ins;
    with ``exclude_visited`` only POIs new to the user, and users left without
    any are dropped.
    """
    visited = visited_pois(train)
    truth: Dict[str, Set[str]] = {}
    for r in test:
        if r.user_id not in visited:
            continue
        if exclude_visited and r.poi_id in visited[r.user_id]:
            continue
        truth.setdefault(r.user_id, set()).add(r.poi_id)
    return dict(sorted(truth.items()))


def build_queries(train: Sequence[CheckIn], test: Sequence[CheckIn]) -> Dict[str, Query]:
    """
    One replay query per user: location of the last train check-in, time and
    category of the first test check-in.
    """
    last: Dict[str, CheckIn] = {}
    for r in train:
        if r.user_id not in last or r.timestamp >= last[r.user_id].timestamp:
            last[r.user_id] = r
    first: Dict[str, CheckIn] = {}
    for r in test:
        if r.user_id not in first or r.timestamp < first[r.user_id].timestamp:
            first[r.user_id] = r
    return {
        user: Query(user, last[user].lat, last[user].lon, first[user].timestamp, first[user].category)
        for user in sorted(first)
        if user in last
    }


def ground_truth_frequency(test: Sequence[CheckIn], truth: Mapping[str, Set[str]]) -> pd.DataFrame:
    """Visit counts of ground-truth POIs in the test period."""
    counts: Dict[Tuple[str, str], int] = {}
    for r in test:
        if r.poi_id in truth.get(r.user_id, ()):
            counts[(r.user_id, r.poi_id)] = counts.get((r.user_id, r.poi_id), 0) + 1
    rows = sorted(counts.items())
    return pd.DataFrame(
        {
            "user_key": [u for (u, _), _ in rows],
            "poi_key": [p for (_, p), _ in rows],
            "frequency": [n for _, n in rows],
        },
        columns=["user_key", "poi_key", "frequency"],
    )


@dataclass
class EvaluationResult:
    reports: List[MetricsReport]
    recommendations: Dict[str, List[str]]
    truth: Dict[str, Set[str]]
    ground_truth: pd.DataFrame

    def report(self, k: int) -> MetricsReport:
        for r in self.reports:
            if r.k == k:
                return r
        raise KeyError(k)

    def metrics_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "k": [r.k for r in self.reports],
                "prec": [r.prec for r in self.reports],
                "rec": [r.rec for r in self.reports],
                "f1": [r.f1 for r in self.reports],
                "mean_rank": [r.mean_rank for r in self.reports],
            },
            columns=["k", "prec", "rec", "f1", "mean_rank"],
        )


def evaluate(
        artifacts: PipelineArtifacts,
        test: Sequence[CheckIn],
        ks: Optional[Sequence[int]] = None,
        truth: Optional[Mapping[str, Set[str]]] = None,
        queries: Optional[Mapping[str, Query]] = None,
) -> EvaluationResult:
    """
    Replays one query per evaluated user and scores the ranked lists.

    Users the pipeline cannot answer for (unknown to the graph, or with an
    empty pool) count as empty lists. The mean rank is the average 1-based
    position of ground-truth POIs in the full ranked pool; POIs missing from
    the pool rank one past its end.
    """
    ks = tuple(ks) if ks is not None else artifacts.cfg.eval.ks
    exclude = artifacts.cfg.eval.exclude_visited
    if truth is None:
        truth = build_truth(artifacts.train, test, exclude)
    if queries is None:
        queries = build_queries(artifacts.train, test)
    if not truth:
        raise PoikgError("No user has both train and (novel) test check-ins to evaluate")

    ranked: Dict[str, List[str]] = {}
    ranks: List[float] = []
    for user, pois in truth.items():
        q = queries.get(user)
        order: List[str] = []
        if q is not None:
            try:
                order = [poi for poi, _ in rank_pool(q, artifacts, exclude)]
            except (UnknownEntityError, EmptyCandidatePoolError) as e:
                poikg.logging.debug(f"no ranking for {user}: {e}")
        position = {poi: i + 1 for i, poi in enumerate(order)}
        ranks.extend(position.get(poi, len(order) + 1) for poi in pois)
        ranked[user] = order
    mean_rank = float(np.mean(ranks)) if ranks else float("nan")

    reports = []
    for k in ks:
        per_user = pd.DataFrame(
            {
                "user_key": list(truth),
                "hits": [_hits(ranked[u], t, k) for u, t in truth.items()],
                "truth_size": [len(t) for t in truth.values()],
            }
        )
        per_user["prec"] = per_user["hits"] / k
        per_user["rec"] = per_user["hits"] / per_user["truth_size"]
        prec = precision_at_k(ranked, truth, k)
        rec = recall_at_k(ranked, truth, k)
        reports.append(
            MetricsReport(k=k, prec=prec, rec=rec, f1=f1_at_k(prec, rec), mean_rank=mean_rank, per_user=per_user)
        )
    top = max(ks)
    return EvaluationResult(
        reports=reports,
        recommendations={u: order[:top] for u, order in ranked.items()},
        truth=dict(truth),
        ground_truth=ground_truth_frequency(test, truth),
    )


def run_sparsity_experiment(split: SplitDataset, fractions: Sequence[float], cfg: PipelineConfig,
                            seed: int = 0) -> pd.DataFrame:
    """
    Retrains with a share of train records removed and evaluates at k = 10.

    Removed records are a prefix of one seeded permutation, so larger
    fractions remove supersets of smaller ones. Ground truth and queries come
    from the full split.
    """
    fractions = list(fractions)
    for fraction in fractions:
        if not 0.0 <= fraction < 1.0:
            raise ConfigError(f"Removal fraction must lie in [0, 1), got {fraction}")
    truth = build_truth(split.train, split.test, cfg.eval.exclude_visited)
    queries = build_queries(split.train, split.test)
    rows = []
    for fraction in fractions:
        order = np.random.default_rng(seed).permutation(len(split.train))
        removed = set(order[: int(round(fraction * len(split.train)))].tolist())
        reduced = [r for i, r in enumerate(split.train) if i not in removed]
        artifacts = fit_pipeline(reduced, cfg)
        report = evaluate(artifacts, split.test, ks=(SPARSITY_K,), truth=truth, queries=queries).reports[0]
        rows.append(
            {
                "fraction": fraction,
                f"prec@{SPARSITY_K}": report.prec,
                f"rec@{SPARSITY_K}": report.rec,
                f"f1@{SPARSITY_K}": report.f1,
            }
        )
        poikg.logging.success(f"sparsity {fraction:.2f}: prec@{SPARSITY_K} {report.prec:.4f}")
    return pd.DataFrame(rows, columns=["fraction", f"prec@{SPARSITY_K}", f"rec@{SPARSITY_K}", f"f1@{SPARSITY_K}"])


def _sweep_row(artifacts: PipelineArtifacts, split: SplitDataset) -> Dict[str, float]:
    result = evaluate(artifacts, split.test, ks=SWEEP_KS)
    row = {f"prec@{k}": result.report(k).prec for k in SWEEP_KS}
    row.update({f"rec@{k}": result.report(k).rec for k in SWEEP_KS})
    row["mean_rank"] = result.reports[0].mean_rank
    return row


SWEEP_METRIC_COLUMNS = [f"prec@{k}" for k in SWEEP_KS] + [f"rec@{k}" for k in SWEEP_KS] + ["mean_rank"]


def run_timeslot_sweep(split: SplitDataset, hours: Sequence[int], cfg: PipelineConfig) -> pd.DataFrame:
    """Retrains and evaluates once per slot length."""
    hours = list(hours)
    for h in hours:
        if h < 1 or 24 % h:
            raise ConfigError(f"Slot length must divide 24, got {h}")
    rows = []
    for h in hours:
        artifacts = fit_pipeline(split.train, cfg.replace(data={"slot_hours": h}))
        row = {"hours": h, **_sweep_row(artifacts, split)}
        rows.append(row)
        poikg.logging.success(f"slot {h}h: prec@10 {row['prec@10']:.4f} rec@10 {row['rec@10']:.4f}")
    return pd.DataFrame(rows, columns=["hours"] + SWEEP_METRIC_COLUMNS)


def run_dim_sweep(split: SplitDataset, dims: Sequence[int], cfg: PipelineConfig) -> pd.DataFrame:
    """Retrains with entity and relation dimension both set to each value."""
    dims = list(dims)
    for d in dims:
        if d < 1:
            raise ConfigError(f"Embedding dimension must be >= 1, got {d}")
    rows = []
    for d in dims:
        artifacts = fit_pipeline(split.train, cfg.replace(transr={"dim_d": d, "dim_k": d}))
        row = {"dim": d, **_sweep_row(artifacts, split), "epochs_trained": len(artifacts.loss_trace)}
        rows.append(row)
        poikg.logging.success(f"dim {d}: prec@10 {row['prec@10']:.4f} rec@10 {row['rec@10']:.4f}")
    return pd.DataFrame(rows, columns=["dim"] + SWEEP_METRIC_COLUMNS + ["epochs_trained"])


class SyntheticSpec(BaseModel):
    """
    A planted-preference check-in log.

    Every user gets a home region, a favorite slot and a few preferred POIs in
    the home region; with probability ``strength`` a check-in hits a preferred
    POI in the favorite slot, otherwise a uniform POI at a uniform time.
    """

    model_config = ConfigDict(frozen=True)

    users: int = 50
    pois: int = 100
    regions: int = 4
    slots: int = 3
    strength: float = 0.9
    checkins_per_user: int = 20
    preferred_per_user: int = 5
    categories: int = 5
    days: int = 100
    start_timestamp: int = 1_300_000_000
    seed: int = 0

    @field_validator("users", "pois", "regions", "slots", "checkins_per_user", "preferred_per_user",
                     "categories", "days")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @field_validator("slots")
    @classmethod
    def _slots(cls, value: int) -> int:
        if 24 % value:
            raise ValueError("slots must divide 24")
        return value

    @field_validator("strength")
    @classmethod
    def _strength(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError("strength must lie in [0, 1]")
        return value

    @model_validator(mode="after")
    def _pois_cover_regions(self):
        if self.pois < self.regions:
            raise ValueError("need at least one POI per region")
        return self

    @property
    def slot_hours(self) -> int:
        return 24 // self.slots

    def region_center(self, region: int) -> Tuple[float, float]:
        """Centers sit on a grid two degrees apart."""
        side = math.ceil(math.sqrt(self.regions))
        return 30.0 + 2.0 * (region // side), -100.0 + 2.0 * (region % side)


def generate_synthetic(spec: SyntheticSpec) -> List[CheckIn]:
    """Deterministic per ``spec.seed``; records come out user by user."""
    rng = np.random.default_rng(spec.seed)
    poi_region = np.arange(spec.pois) % spec.regions
    centers = np.array([spec.region_center(r) for r in poi_region])
    poi_xy = centers + rng.uniform(-0.05, 0.05, size=(spec.pois, 2))
    poi_keys = [f"p{j:03d}" for j in range(spec.pois)]
    day0 = spec.start_timestamp - spec.start_timestamp % SECONDS_PER_DAY
    slot_seconds = spec.slot_hours * SECONDS_PER_HOUR

    records = []
    for u in range(spec.users):
        home = int(rng.integers(spec.regions))
        local = np.flatnonzero(poi_region == home)
        preferred = rng.choice(local, size=min(spec.preferred_per_user, len(local)), replace=False)
        favorite = int(rng.integers(spec.slots))
        for _ in range(spec.checkins_per_user):
            if rng.random() < spec.strength:
                poi = int(rng.choice(preferred))
                slot = favorite
            else:
                poi = int(rng.integers(spec.pois))
                slot = int(rng.integers(spec.slots))
            day = int(rng.integers(spec.days))
            offset = slot * slot_seconds + int(rng.integers(slot_seconds))
            records.append(
                CheckIn(
                    user_id=f"u{u:03d}",
                    poi_id=poi_keys[poi],
                    lat=float(poi_xy[poi, 0]),
                    lon=float(poi_xy[poi, 1]),
                    timestamp=float(day0 + day * SECONDS_PER_DAY + offset),
                    category=f"cat{poi % spec.categories}",
                )
            )
    return records
