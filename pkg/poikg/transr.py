"""
TransR embeddings over composed relation paths.

Entities live in R^k, base relation components (time slot, region, category)
in R^d. A relation path is the Hadamard product of its components and every
path has its own projection ``M_r`` of shape (k, d). A triple scores
``f_r(h, t) = ||h M_r + r - t M_r||^2``; lower is more plausible.
"""

import argparse
import functools
import json
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import field_validator

import poikg
from poikg.config import ConfigSection
from poikg.errors import (
    DataError,
    DimensionMismatchError,
    DivergenceError,
    UnknownEntityError,
    UnknownRelationError,
)
from poikg.kg_builder import KnowledgeGraph, NegativeSampler

CHECKPOINT_FORMAT_VERSION = 1


class TrainConfig(ConfigSection):
    section = "transr"

    learning_rate: float = 0.001
    margin: float = 1.0
    dim_d: int = 100
    dim_k: int = 100
    batch_size: int = 120
    epochs: int = 1000
    seed: int = 0
    negatives_per_positive: int = 1
    sampling: Literal["unif", "bern"] = "unif"
    resample_per_epoch: bool = True

    @field_validator("learning_rate", "margin")
    @classmethod
    def _positive_real(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be > 0")
        return value

    @field_validator("dim_d", "dim_k", "batch_size", "negatives_per_positive")
    @classmethod
    def _positive_int(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @field_validator("epochs")
    @classmethod
    def _epochs(cls, value: int) -> int:
        if value < 0:
            raise ValueError("must be >= 0")
        return value

    @classmethod
    def add_args(cls, parser: argparse.ArgumentParser, prefix: Optional[str] = None):
        prefix_str = "" if prefix is None else prefix + "."
        try:
            parser.add_argument(
                "--" + prefix_str + "transr.learning_rate",
                type=float,
                default=0.001,
                help="SGD learning rate.",
            )
            parser.add_argument(
                "--" + prefix_str + "transr.margin",
                type=float,
                default=1.0,
                help="Margin of the ranking loss.",
            )
            parser.add_argument(
                "--" + prefix_str + "transr.dim_d",
                type=int,
                default=100,
                help="Relation space dimension.",
            )
            parser.add_argument(
                "--" + prefix_str + "transr.dim_k",
                type=int,
                default=100,
                help="Entity space dimension.",
            )
            parser.add_argument(
                "--" + prefix_str + "transr.batch_size",
                type=int,
                default=120,
                help="Positive triples per mini-batch.",
            )
            parser.add_argument(
                "--" + prefix_str + "transr.epochs",
                type=int,
                default=1000,
                help="Passes over the training triples.",
            )
            parser.add_argument(
                "--" + prefix_str + "transr.seed",
                type=int,
                default=0,
                help="Seed for initialization, shuffling and corruption.",
            )
            parser.add_argument(
                "--" + prefix_str + "transr.negatives_per_positive",
                type=int,
                default=1,
                help="Corrupted triples drawn per positive.",
            )
            parser.add_argument(
                "--" + prefix_str + "transr.sampling",
                choices=["unif", "bern"],
                default="unif",
                help="Which side to corrupt: uniformly, or by per-relation head/tail statistics.",
            )
            parser.add_argument(
                "--" + prefix_str + "transr.resample_per_epoch",
                action=argparse.BooleanOptionalAction,
                default=True,
                help="Draw fresh negatives every epoch.",
            )
        except argparse.ArgumentError:
            # re-parsing arguments.
            pass


@dataclass(eq=False)
class TransRModel:
    entity_emb: np.ndarray
    slot_emb: np.ndarray
    region_emb: np.ndarray
    category_emb: np.ndarray
    proj: np.ndarray
    relation_components: np.ndarray
    n_users: int
    n_pois: int

    def __post_init__(self):
        if self.proj.shape[0] != len(self.relation_components):
            raise DimensionMismatchError("One projection matrix per relation path is required")
        if self.proj.shape[1:] != (self.dim_k, self.dim_d):
            raise DimensionMismatchError(
                f"Projections are {self.proj.shape[1:]}, expected {(self.dim_k, self.dim_d)}"
            )
        if self.n_users + self.n_pois != len(self.entity_emb):
            raise DimensionMismatchError("Entity table does not match the user and POI counts")

    @property
    def dim_k(self) -> int:
        return self.entity_emb.shape[1]

    @property
    def dim_d(self) -> int:
        return self.slot_emb.shape[1]

    @property
    def n_relations(self) -> int:
        return len(self.relation_components)

    def check_relation(self, rel: int):
        if not 0 <= int(rel) < self.n_relations:
            raise UnknownRelationError(f"Relation id {rel} has no projection matrix")

    def components(self, rels: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Slot, region and category vectors of ``rels``; the category is all-ones where a path has none."""
        comp = self.relation_components[np.asarray(rels, dtype=np.int64)]
        slot = self.slot_emb[comp[..., 0]]
        region = self.region_emb[comp[..., 1]]
        has_cat = comp[..., 2] >= 0
        category = np.ones_like(slot)
        if has_cat.any():
            category[has_cat] = self.category_emb[comp[..., 2][has_cat]]
        return slot, region, category, has_cat

    def relation_embedding(self, rel: int) -> np.ndarray:
        self.check_relation(rel)
        slot, region, category, has_cat = self.components(np.array([rel]))
        parts = [slot[0], region[0]] + ([category[0]] if has_cat[0] else [])
        return compose_relation_embedding(parts)

    def relation_embeddings(self, rels: np.ndarray) -> np.ndarray:
        slot, region, category, _ = self.components(rels)
        return slot * region * category

    def copy(self) -> "TransRModel":
        return TransRModel(
            entity_emb=self.entity_emb.copy(),
            slot_emb=self.slot_emb.copy(),
            region_emb=self.region_emb.copy(),
            category_emb=self.category_emb.copy(),
            proj=self.proj.copy(),
            relation_components=self.relation_components.copy(),
            n_users=self.n_users,
            n_pois=self.n_pois,
        )

    def save(self, path: str, cfg: Optional[TrainConfig] = None):
        """Writes every array row-major plus a JSON metadata record; reloads bit-exactly."""
        meta = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "n_users": self.n_users,
            "n_pois": self.n_pois,
            "dim_k": self.dim_k,
            "dim_d": self.dim_d,
            "train_config": cfg.model_dump() if cfg is not None else None,
        }
        with open(path, "wb") as f:
            np.savez(
                f,
                entity_emb=self.entity_emb,
                slot_emb=self.slot_emb,
                region_emb=self.region_emb,
                category_emb=self.category_emb,
                proj=self.proj,
                relation_components=self.relation_components,
                meta=np.array(json.dumps(meta)),
            )

    @classmethod
    def load(cls, path: str) -> Tuple["TransRModel", Optional[TrainConfig]]:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            model = cls(
                entity_emb=data["entity_emb"],
                slot_emb=data["slot_emb"],
                region_emb=data["region_emb"],
                category_emb=data["category_emb"],
                proj=data["proj"],
                relation_components=data["relation_components"],
                n_users=int(meta["n_users"]),
                n_pois=int(meta["n_pois"]),
            )
        cfg = TrainConfig(**meta["train_config"]) if meta.get("train_config") else None
        return model, cfg


def compose_relation_embedding(components: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise product of the component vectors, in order."""
    if len(components) == 0:
        raise DimensionMismatchError("A relation path needs at least one component")
    vectors = [np.asarray(c, dtype=float) for c in components]
    shape = vectors[0].shape
    if len(shape) != 1 or any(v.shape != shape for v in vectors):
        raise DimensionMismatchError(f"Components must share one 1-d shape, got {[v.shape for v in vectors]}")
    return functools.reduce(np.multiply, vectors)


def project_entity(e: np.ndarray, M_r: np.ndarray) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    M_r = np.asarray(M_r, dtype=float)
    if e.ndim != 1 or M_r.ndim != 2 or e.shape[0] != M_r.shape[0]:
        raise DimensionMismatchError(f"Cannot project a {e.shape} vector with a {M_r.shape} matrix")
    return e @ M_r


def _check_triples(model: TransRModel, triples: np.ndarray) -> np.ndarray:
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if len(triples):
        heads, rels, tails = triples[:, 0], triples[:, 1], triples[:, 2]
        if heads.min() < 0 or heads.max() >= model.n_users:
            raise UnknownEntityError("Triple head is not a user entity")
        if tails.min() < model.n_users or tails.max() >= model.n_users + model.n_pois:
            raise UnknownEntityError("Triple tail is not a POI entity")
        if rels.min() < 0 or rels.max() >= model.n_relations:
            raise UnknownRelationError("Triple relation has no projection matrix")
    return triples


def _residuals(model: TransRModel, triples: np.ndarray) -> np.ndarray:
    """``(h - t) M_r + r`` for every triple."""
    diff = model.entity_emb[triples[:, 0]] - model.entity_emb[triples[:, 2]]
    return np.einsum("nk,nkd->nd", diff, model.proj[triples[:, 1]]) + model.relation_embeddings(triples[:, 1])


def score_triples(model: TransRModel, triples: np.ndarray) -> np.ndarray:
    triples = _check_triples(model, triples)
    residual = _residuals(model, triples)
    return np.einsum("nd,nd->n", residual, residual)


def score(head: int, rel: int, tail: int, model: TransRModel) -> float:
    """
    ``||h M_r + r - t M_r||^2`` for one triple.

    ``head`` is a user entity index and ``tail`` a POI entity index, as stored
    in :class:`~poikg.kg_builder.KnowledgeGraph` triples.
    """
    return float(score_triples(model, np.array([[head, rel, tail]]))[0])


def score_pairs(model: TransRModel, rel: int, heads: np.ndarray, tails: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """Score matrix of every head against every tail under one relation."""
    model.check_relation(rel)
    M = model.proj[rel]
    r = model.relation_embedding(rel)
    head_proj = model.entity_emb[np.asarray(heads, dtype=np.int64)] @ M + r
    tail_proj = model.entity_emb[np.asarray(tails, dtype=np.int64)] @ M
    scores = np.empty((len(head_proj), len(tail_proj)))
    for start in range(0, len(head_proj), chunk):
        block = head_proj[start:start + chunk, None, :] - tail_proj[None, :, :]
        scores[start:start + chunk] = np.einsum("utd,utd->ut", block, block)
    return scores


def margin_loss(pos: Tuple[int, int, int], negs: Sequence[Tuple[int, int, int]], model: TransRModel,
                margin: float) -> float:
    """Sum over ``negs`` of ``max(0, f(pos) + margin - f(neg))``."""
    negs = np.asarray(negs, dtype=np.int64).reshape(-1, 3)
    if len(negs) == 0:
        return 0.0
    if np.any(negs[:, 1] != pos[1]):
        raise DataError("Negatives must share the positive's relation")
    f_pos = score(*pos, model)
    f_neg = score_triples(model, negs)
    return float(np.maximum(0.0, f_pos + margin - f_neg).sum())


@dataclass
class Gradients:
    """
    Loss gradients restricted to the rows a batch touched.

    ``*_idx`` are unique row indices into the matching model table.
    """

    entity_idx: np.ndarray
    entity: np.ndarray
    slot_idx: np.ndarray
    slot: np.ndarray
    region_idx: np.ndarray
    region: np.ndarray
    category_idx: np.ndarray
    category: np.ndarray
    proj_idx: np.ndarray
    proj: np.ndarray

    def dense(self, model: TransRModel) -> dict:
        """Full-size gradient arrays keyed like the model's tables."""
        tables = {
            "entity_emb": (model.entity_emb, self.entity_idx, self.entity),
            "slot_emb": (model.slot_emb, self.slot_idx, self.slot),
            "region_emb": (model.region_emb, self.region_idx, self.region),
            "category_emb": (model.category_emb, self.category_idx, self.category),
            "proj": (model.proj, self.proj_idx, self.proj),
        }
        result = {}
        for name, (table, idx, grad) in tables.items():
            full = np.zeros_like(table)
            if len(idx):
                full[idx] = grad
            result[name] = full
        return result


def _accumulate(idx: np.ndarray, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    unique, inverse = np.unique(idx, return_inverse=True)
    acc = np.zeros((len(unique),) + values.shape[1:])
    np.add.at(acc, inverse.reshape(-1), values)
    return unique, acc


def _pair_up(pos: np.ndarray, neg: np.ndarray) -> np.ndarray:
    """Repeats each positive once per negative; ``neg`` rows are grouped by positive."""
    if len(pos) == 0:
        return pos
    if len(neg) % len(pos):
        raise DataError(f"{len(neg)} negatives cannot be split evenly over {len(pos)} positives")
    return np.repeat(pos, len(neg) // len(pos), axis=0)


def batch_loss(model: TransRModel, pos: np.ndarray, neg: np.ndarray, margin: float) -> float:
    pos = _check_triples(model, pos)
    neg = _check_triples(model, neg)
    paired = _pair_up(pos, neg)
    hinge = score_triples(model, paired) + margin - score_triples(model, neg)
    return float(np.maximum(hinge, 0.0).sum())


def loss_and_gradients(model: TransRModel, pos: np.ndarray, neg: np.ndarray,
                       margin: float) -> Tuple[float, Gradients]:
    """
    Margin loss of a batch and its analytic gradient.

    With ``x = (h - t) M + r`` a triple contributes ``d/dh = 2 M x``,
    ``d/dt = -2 M x``, ``d/dM = 2 (h - t) x^T`` and, for each component
    ``c_i`` of ``r``, ``2 x * prod_{j != i} c_j``. Positives enter with sign +1
    and negatives with -1; inactive hinge terms contribute nothing.
    """
    pos = _check_triples(model, pos)
    neg = _check_triples(model, neg)
    paired = _pair_up(pos, neg)
    f_pos = score_triples(model, paired)
    f_neg = score_triples(model, neg)
    hinge = f_pos + margin - f_neg
    active = hinge > 0
    loss = float(hinge[active].sum())

    triples = np.concatenate([paired[active], neg[active]])
    sign = np.concatenate([np.ones(int(active.sum())), -np.ones(int(active.sum()))])
    heads, rels, tails = triples[:, 0], triples[:, 1], triples[:, 2]

    M = model.proj[rels]
    diff = model.entity_emb[heads] - model.entity_emb[tails]
    slot, region, category, has_cat = model.components(rels)
    residual = np.einsum("nk,nkd->nd", diff, M) + slot * region * category
    g_res = 2.0 * sign[:, None] * residual

    g_head = np.einsum("nkd,nd->nk", M, g_res)
    entity_idx, entity = _accumulate(np.concatenate([heads, tails]), np.concatenate([g_head, -g_head]))
    proj_idx, proj = _accumulate(rels, np.einsum("nk,nd->nkd", diff, g_res))

    comp = model.relation_components[rels]
    slot_idx, slot_g = _accumulate(comp[:, 0], g_res * region * category)
    region_idx, region_g = _accumulate(comp[:, 1], g_res * slot * category)
    category_idx, category_g = _accumulate(comp[has_cat, 2], (g_res * slot * region)[has_cat])

    grads = Gradients(
        entity_idx=entity_idx,
        entity=entity,
        slot_idx=slot_idx,
        slot=slot_g,
        region_idx=region_idx,
        region=region_g,
        category_idx=category_idx,
        category=category_g.reshape(-1, model.dim_d),
        proj_idx=proj_idx,
        proj=proj.reshape(-1, model.dim_k, model.dim_d),
    )
    return loss, grads


def _clip_rows(table: np.ndarray, idx: np.ndarray):
    """Rescales rows of ``table`` with norm above 1 back onto the unit sphere."""
    if not len(idx):
        return
    norms = np.linalg.norm(table[idx], axis=1)
    over = norms > 1.0
    if over.any():
        table[idx[over]] /= norms[over, None]


def enforce_norm_constraints(model: TransRModel, triples: np.ndarray):
    """
    Re-imposes the unit-ball constraints on what ``triples`` touched.

    Each touched entity is scaled by ``min(1, 1/||e||, 1/max_r ||e M_r||)``
    over the relations it appeared with. Base components are clipped to norm
    1, which bounds every composed path by 1 as well.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if not len(triples):
        return
    entities = np.concatenate([triples[:, 0], triples[:, 2]])
    rels = np.concatenate([triples[:, 1], triples[:, 1]])
    projected = np.einsum("nk,nkd->nd", model.entity_emb[entities], model.proj[rels])

    unique, inverse = np.unique(entities, return_inverse=True)
    worst = np.linalg.norm(model.entity_emb[unique], axis=1)
    np.maximum.at(worst, inverse.reshape(-1), np.linalg.norm(projected, axis=1))
    scale = np.where(worst > 1.0, 1.0 / np.maximum(worst, 1e-300), 1.0)
    model.entity_emb[unique] *= scale[:, None]

    comp = model.relation_components[np.unique(triples[:, 1])]
    _clip_rows(model.slot_emb, np.unique(comp[:, 0]))
    _clip_rows(model.region_emb, np.unique(comp[:, 1]))
    _clip_rows(model.category_emb, np.unique(comp[comp[:, 2] >= 0, 2]))


def grad_step(model: TransRModel, pos: np.ndarray, neg: np.ndarray,
              cfg: TrainConfig) -> Tuple[TransRModel, float]:
    """
    One SGD step on a batch, in place.

    Returns the model and the batch loss measured before the update.

    Raises:
        DivergenceError: if the batch loss is not finite.
    """
    loss, grads = loss_and_gradients(model, pos, neg, cfg.margin)
    if not np.isfinite(loss):
        raise DivergenceError(f"TransR batch loss is {loss}")
    if loss == 0.0:
        return model, loss

    lr = cfg.learning_rate
    model.entity_emb[grads.entity_idx] -= lr * grads.entity
    model.proj[grads.proj_idx] -= lr * grads.proj
    model.slot_emb[grads.slot_idx] -= lr * grads.slot
    model.region_emb[grads.region_idx] -= lr * grads.region
    if len(grads.category_idx):
        model.category_emb[grads.category_idx] -= lr * grads.category

    enforce_norm_constraints(model, np.concatenate([np.asarray(pos).reshape(-1, 3), np.asarray(neg).reshape(-1, 3)]))
    return model, loss


def _uniform_unit_rows(rng: np.random.Generator, rows: int, dim: int) -> np.ndarray:
    bound = 6.0 / np.sqrt(dim)
    table = rng.uniform(-bound, bound, size=(rows, dim))
    norms = np.linalg.norm(table, axis=1, keepdims=True)
    return table / np.where(norms > 0, norms, 1.0)


def init_model(graph: KnowledgeGraph, cfg: TrainConfig, rng: np.random.Generator) -> TransRModel:
    """Uniform ``±6/sqrt(dim)`` rows normalized to unit length; projections start as the truncated identity."""
    relations = graph.relations
    k, d = cfg.dim_k, cfg.dim_d
    return TransRModel(
        entity_emb=_uniform_unit_rows(rng, graph.vocab.n_entities, k),
        slot_emb=_uniform_unit_rows(rng, relations.n_slots, d),
        region_emb=_uniform_unit_rows(rng, relations.n_regions, d),
        category_emb=_uniform_unit_rows(rng, relations.n_categories, d),
        proj=np.tile(np.eye(k, d), (len(relations), 1, 1)),
        relation_components=relations.components(),
        n_users=graph.vocab.n_users,
        n_pois=graph.vocab.n_pois,
    )


StepCallback = Callable[[int, TransRModel, np.ndarray], None]


@dataclass
class TrainResult:
    model: TransRModel
    loss_trace: List[float] = field(default_factory=list)


def train(graph: KnowledgeGraph, cfg: TrainConfig, callback: Optional[StepCallback] = None) -> TrainResult:
    """
    Mini-batch SGD over shuffled positives for ``cfg.epochs`` epochs.

    The trace holds the mean batch loss of every epoch. ``callback`` is called
    after each step with the step number, the model and the triples touched.
    """
    if len(graph) == 0:
        raise DataError("Cannot train on a graph without triples")
    rng = np.random.default_rng(cfg.seed)
    model = init_model(graph, cfg, rng)
    result = TrainResult(model=model)
    if cfg.epochs == 0:
        return result

    sampler = NegativeSampler(graph, strategy=cfg.sampling)
    n_neg = cfg.negatives_per_positive
    positives = graph.triples
    negatives = None
    step = 0
    for epoch in range(cfg.epochs):
        if negatives is None or cfg.resample_per_epoch:
            negatives = sampler.corrupt(positives, rng, n_neg).reshape(len(positives), n_neg, 3)
        order = rng.permutation(len(positives))
        batch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            pos = positives[idx]
            neg = negatives[idx].reshape(-1, 3)
            _, loss = grad_step(model, pos, neg, cfg)
            batch_losses.append(loss)
            step += 1
            if callback is not None:
                callback(step, model, np.concatenate([pos, neg]))
        result.loss_trace.append(float(np.mean(batch_losses)))
        poikg.logging.debug(f"epoch {epoch + 1}/{cfg.epochs} loss {result.loss_trace[-1]:.6f}", prefix="transr")
    poikg.logging.info(
        f"TransR trained {cfg.epochs} epochs: loss {result.loss_trace[0]:.4f} -> {result.loss_trace[-1]:.4f}"
    )
    return result


def write_loss_trace(trace: Sequence[float], path: str, column: str = "mean_loss"):
    pd.DataFrame({"epoch": np.arange(1, len(trace) + 1), column: np.asarray(trace, dtype=float)}).to_csv(
        path, index=False, float_format="%.17g"
    )


def read_loss_trace(path: str, column: str = "mean_loss") -> List[float]:
    return pd.read_csv(path)[column].astype(float).tolist()
