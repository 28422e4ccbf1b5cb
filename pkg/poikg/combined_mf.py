"""
Spatio-temporal and preference matrix factorizations, combined
multiplicatively into one ranking score.
"""

import argparse
import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from pydantic import field_validator

import poikg
from poikg.candidate_extraction import CandidateSet
from poikg.checkin_data import CheckIn, FrequencyMatrix, build_frequency_matrix
from poikg.config import ConfigSection
from poikg.errors import CandidateIndexError, DataError, DivergenceError, UnknownEntityError
from poikg.kg_builder import KnowledgeGraph


class MFConfig(ConfigSection):
    section = "mf"

    k: int = 20
    alpha: float = 0.01
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0
    sample_zeros: bool = True
    dampen: bool = True

    @field_validator("k", "batch_size")
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

    @field_validator("alpha")
    @classmethod
    def _alpha(cls, value: float) -> float:
        if value < 0:
            raise ValueError("alpha must be >= 0")
        return value

    @field_validator("learning_rate")
    @classmethod
    def _learning_rate(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("learning_rate must be > 0")
        return value

    @classmethod
    def add_args(cls, parser: argparse.ArgumentParser, prefix: Optional[str] = None):
        prefix_str = "" if prefix is None else prefix + "."
        try:
            parser.add_argument(
                "--" + prefix_str + "mf.k", type=int, default=20, help="Latent dimension K."
            )
            parser.add_argument(
                "--" + prefix_str + "mf.alpha", type=float, default=0.01, help="Frobenius regularization weight."
            )
            parser.add_argument(
                "--" + prefix_str + "mf.learning_rate", type=float, default=0.01, help="SGD learning rate."
            )
            parser.add_argument(
                "--" + prefix_str + "mf.epochs", type=int, default=200, help="Passes over the observed entries."
            )
            parser.add_argument(
                "--" + prefix_str + "mf.batch_size", type=int, default=64, help="Observed entries per SGD step."
            )
            parser.add_argument(
                "--" + prefix_str + "mf.seed", type=int, default=0, help="Seed for initialization and sampling."
            )
            parser.add_argument(
                "--" + prefix_str + "mf.sample_zeros",
                action=argparse.BooleanOptionalAction,
                default=True,
                help="Add as many sampled zero entries as there are nonzero ones.",
            )
            parser.add_argument(
                "--" + prefix_str + "mf.dampen",
                action=argparse.BooleanOptionalAction,
                default=True,
                help="Fit 1 + log(1 + count) instead of raw counts.",
            )
        except argparse.ArgumentError:
            # re-parsing arguments.
            pass


@dataclass
class MFResult:
    row_factors: np.ndarray
    col_factors: np.ndarray
    objective_trace: List[float] = field(default_factory=list)


def _as_sparse(counts: Union[FrequencyMatrix, np.ndarray, sp.spmatrix]) -> sp.csr_matrix:
    if isinstance(counts, FrequencyMatrix):
        return counts.counts.tocsr()
    if sp.issparse(counts):
        return sp.csr_matrix(counts)
    return sp.csr_matrix(np.asarray(counts, dtype=float))


def dampen_counts(values: np.ndarray) -> np.ndarray:
    """``1 + log(1 + x)`` on nonzero counts; zeros stay zero."""
    values = np.asarray(values, dtype=float)
    return np.where(values != 0, 1.0 + np.log1p(np.abs(values)) * np.sign(values), 0.0)


# Above this many cells zero entries are found by rejection instead of enumeration.
DENSE_ENUMERATION_LIMIT = 10_000_000


def _sample_zero_cells(nonzero: np.ndarray, n_cells: int, wanted: int, rng: np.random.Generator) -> np.ndarray:
    if n_cells <= DENSE_ENUMERATION_LIMIT:
        taken = np.zeros(n_cells, dtype=bool)
        taken[nonzero] = True
        return rng.choice(np.flatnonzero(~taken), size=wanted, replace=False)
    nonzero = np.sort(nonzero)
    picked = np.empty(0, dtype=np.int64)
    while len(picked) < wanted:
        draw = rng.integers(0, n_cells, size=2 * (wanted - len(picked)) + 16)
        draw = draw[~np.isin(draw, nonzero)]
        picked = pd.unique(np.concatenate([picked, draw]))[:wanted]
    return picked


def observed_entries(matrix: sp.csr_matrix, sample_zeros: bool,
                     rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Rows, columns and values of the training set: every nonzero entry, plus as
    many zero entries drawn uniformly without replacement when ``sample_zeros``.
    """
    coo = matrix.tocoo()
    mask = coo.data != 0
    rows, cols, vals = coo.row[mask].astype(np.int64), coo.col[mask].astype(np.int64), coo.data[mask].astype(float)
    if not sample_zeros:
        return rows, cols, vals
    n_rows, n_cols = matrix.shape
    nonzero = rows * n_cols + cols
    n_zero = n_rows * n_cols - len(nonzero)
    wanted = min(len(nonzero), n_zero)
    if wanted == 0:
        return rows, cols, vals
    picked = np.sort(_sample_zero_cells(nonzero, n_rows * n_cols, wanted, rng))
    return (
        np.concatenate([rows, picked // n_cols]),
        np.concatenate([cols, picked % n_cols]),
        np.concatenate([vals, np.zeros(wanted)]),
    )


def mf_objective(E: np.ndarray, O: np.ndarray, rows, cols, vals, alpha: float) -> float:
    """``alpha (||E||^2 + ||O||^2) + sum over observed (P_uv - E_u . O_v)^2``."""
    residual = vals - np.einsum("kn,kn->n", E[:, rows], O[:, cols])
    return float(alpha * (np.sum(E * E) + np.sum(O * O)) + np.sum(residual * residual))


def train_mf(counts: Union[FrequencyMatrix, np.ndarray, sp.spmatrix], cfg: MFConfig,
             seed: Optional[int] = None) -> MFResult:
    """
    Mini-batch SGD on the squared error over observed entries, with the
    Frobenius penalty applied as an exact proximal shrink once per epoch.

    Factors start from N(0, 0.1^2). ``objective_trace[0]`` is the objective at
    initialization, then one value per epoch.

    Raises:
        DivergenceError: if the objective stops being finite.
    """
    matrix = _as_sparse(counts)
    n_rows, n_cols = matrix.shape
    if n_rows == 0 or n_cols == 0:
        raise DataError("Cannot factorize an empty matrix")
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    E = rng.normal(0.0, 0.1, size=(cfg.k, n_rows))
    O = rng.normal(0.0, 0.1, size=(cfg.k, n_cols))

    rows, cols, vals = observed_entries(matrix, cfg.sample_zeros, rng)
    if cfg.dampen:
        vals = dampen_counts(vals)

    lr = cfg.learning_rate
    shrink = 1.0 + 2.0 * lr * cfg.alpha
    trace = [mf_objective(E, O, rows, cols, vals, cfg.alpha)]
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(vals))
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            r, c = rows[idx], cols[idx]
            e_r, o_c = E[:, r], O[:, c]
            err = vals[idx] - np.einsum("kn,kn->n", e_r, o_c)
            np.add.at(E.T, r, (2.0 * lr * err)[:, None] * o_c.T)
            np.add.at(O.T, c, (2.0 * lr * err)[:, None] * e_r.T)
        if cfg.alpha:
            E /= shrink
            O /= shrink
        trace.append(mf_objective(E, O, rows, cols, vals, cfg.alpha))
        if not np.isfinite(trace[-1]):
            raise DivergenceError(f"MF objective diverged at epoch {epoch + 1}: {trace[-1]}")
        poikg.logging.debug(f"epoch {epoch + 1}/{cfg.epochs} objective {trace[-1]:.6f}", prefix="mf")
    return MFResult(row_factors=E, col_factors=O, objective_trace=trace)


@dataclass(eq=False)
class FactorModel:
    """
    ``E``/``O`` factor the candidate-restricted matrix, ``U``/``V`` the global
    one; every factor matrix is K x (number of rows or columns). The key lists
    map matrix columns back to users and POIs.
    """

    E: np.ndarray
    O: np.ndarray
    U: np.ndarray
    V: np.ndarray
    alpha: float
    st_users: List[str]
    st_pois: List[str]
    users: List[str]
    pois: List[str]

    def __post_init__(self):
        K = self.E.shape[0]
        if any(m.shape[0] != K for m in (self.O, self.U, self.V)):
            raise DataError("Factor matrices disagree on the latent dimension")
        if self.E.shape[1] != len(self.st_users) or self.O.shape[1] != len(self.st_pois):
            raise DataError("Spatio-temporal factors do not match the candidate index maps")
        if self.U.shape[1] != len(self.users) or self.V.shape[1] != len(self.pois):
            raise DataError("Preference factors do not match the global index maps")
        if not all(np.isfinite(m).all() for m in (self.E, self.O, self.U, self.V)):
            raise DataError("Factor matrices hold non-finite values")
        self._users = {key: i for i, key in enumerate(self.users)}
        self._pois = {key: j for j, key in enumerate(self.pois)}
        st_user_of = {key: i for i, key in enumerate(self.st_users)}
        st_poi_of = {key: j for j, key in enumerate(self.st_pois)}
        # global index -> candidate index, -1 when extracted away
        self.st_user_index = np.array([st_user_of.get(key, -1) for key in self.users], dtype=np.int64)
        self.st_poi_index = np.array([st_poi_of.get(key, -1) for key in self.pois], dtype=np.int64)

    @property
    def K(self) -> int:
        return self.E.shape[0]

    def user_index(self, key: str) -> int:
        try:
            return self._users[key]
        except KeyError:
            raise UnknownEntityError(f"Unknown user '{key}'") from None

    def poi_index(self, key: str) -> int:
        try:
            return self._pois[key]
        except KeyError:
            raise UnknownEntityError(f"Unknown POI '{key}'") from None

    def save(self, path: str):
        meta = {
            "K": self.K,
            "alpha": self.alpha,
            "st_users": self.st_users,
            "st_pois": self.st_pois,
            "users": self.users,
            "pois": self.pois,
        }
        with open(path, "wb") as f:
            np.savez(f, E=self.E, O=self.O, U=self.U, V=self.V, meta=np.array(json.dumps(meta)))

    @classmethod
    def load(cls, path: str) -> "FactorModel":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            return cls(
                E=data["E"],
                O=data["O"],
                U=data["U"],
                V=data["V"],
                alpha=float(meta["alpha"]),
                st_users=meta["st_users"],
                st_pois=meta["st_pois"],
                users=meta["users"],
                pois=meta["pois"],
            )


def predict_st(u: int, v: int, model: FactorModel) -> float:
    """``E_u . O_v`` over candidate-local indices."""
    if not 0 <= u < model.E.shape[1]:
        raise CandidateIndexError(f"User {u} is not in the extracted candidate set")
    if not 0 <= v < model.O.shape[1]:
        raise CandidateIndexError(f"POI {v} is not in the extracted candidate set")
    return float(model.E[:, u] @ model.O[:, v])


def predict_pref(u: int, v: int, model: FactorModel) -> float:
    """``U_u . V_v`` over global user and POI indices."""
    if not 0 <= u < model.U.shape[1]:
        raise CandidateIndexError(f"User index {u} outside [0, {model.U.shape[1]})")
    if not 0 <= v < model.V.shape[1]:
        raise CandidateIndexError(f"POI index {v} outside [0, {model.V.shape[1]})")
    return float(model.U[:, u] @ model.V[:, v])


def combine_values(st: np.ndarray, pref: np.ndarray) -> np.ndarray:
    """Product of the two scores, each clamped below at 0."""
    return np.maximum(st, 0.0) * np.maximum(pref, 0.0)


def combine(u: int, v: int, model: FactorModel) -> float:
    """
    Combined score of global user ``u`` and POI ``v``; 0 when either side was
    extracted away from the spatio-temporal factorization.
    """
    pref = predict_pref(u, v, model)
    cu, cv = model.st_user_index[u], model.st_poi_index[v]
    if cu < 0 or cv < 0:
        return 0.0
    return float(combine_values(predict_st(int(cu), int(cv), model), pref))


def combine_scores(u: int, pois: Sequence[int], model: FactorModel) -> np.ndarray:
    """:func:`combine` of one user against many POIs."""
    pois = np.asarray(pois, dtype=np.int64)
    if not 0 <= u < model.U.shape[1]:
        raise CandidateIndexError(f"User index {u} outside [0, {model.U.shape[1]})")
    if len(pois) and (pois.min() < 0 or pois.max() >= model.V.shape[1]):
        raise CandidateIndexError("POI index outside the preference factorization")
    pref = model.U[:, u] @ model.V[:, pois]
    cu = model.st_user_index[u]
    if cu < 0:
        return np.zeros(len(pois))
    cv = model.st_poi_index[pois]
    st = np.zeros(len(pois))
    inside = cv >= 0
    st[inside] = model.E[:, cu] @ model.O[:, cv[inside]]
    return np.where(inside, combine_values(st, pref), 0.0)


@dataclass
class CombinedResult:
    model: FactorModel
    st_trace: List[float]
    pref_trace: List[float]


def fit_combined_mf(train: Sequence[CheckIn], graph: KnowledgeGraph, candidates: CandidateSet,
                    cfg: MFConfig) -> CombinedResult:
    """
    Factorizes the candidate-restricted matrix P' and the global matrix F.

    P' rows and columns follow the candidate set order; F follows the graph
    vocabulary. The preference factorization uses ``cfg.seed + 1``.
    """
    vocab = graph.vocab
    st_users = [vocab.key_of(u) for u in candidates.user_set]
    st_pois = [vocab.key_of(v) for v in candidates.poi_set]
    p_st = build_frequency_matrix(train, st_users, st_pois)
    p_pref = build_frequency_matrix(train, vocab.users, vocab.pois)

    st = train_mf(p_st, cfg, seed=cfg.seed)
    pref = train_mf(p_pref, cfg, seed=cfg.seed + 1)
    poikg.logging.info(
        f"MF objectives: spatio-temporal {st.objective_trace[0]:.4f} -> {st.objective_trace[-1]:.4f}, "
        f"preference {pref.objective_trace[0]:.4f} -> {pref.objective_trace[-1]:.4f}"
    )
    model = FactorModel(
        E=st.row_factors,
        O=st.col_factors,
        U=pref.row_factors,
        V=pref.col_factors,
        alpha=cfg.alpha,
        st_users=st_users,
        st_pois=st_pois,
        users=list(vocab.users),
        pois=list(vocab.pois),
    )
    return CombinedResult(model=model, st_trace=st.objective_trace, pref_trace=pref.objective_trace)
