"""
The artifact directory shared by the CLI stages.

Every stage reads what earlier stages wrote under ``--out-dir`` and writes its
own outputs there, so a pipeline can be run one command at a time.
"""

import json
import os
from typing import List, Optional, Tuple

import pandas as pd

import poikg
from poikg.candidate_extraction import CandidateSet
from poikg.checkin_data import (
    CheckinFormat,
    DataConfig,
    RegionModel,
    SplitDataset,
    fit_home_locations,
    parse_checkins,
    poi_coordinates,
    write_checkins,
)
from poikg.combined_mf import FactorModel
from poikg.errors import DataError
from poikg.kg_builder import ENTITIES_FILE, RELATION_SPACE_FILE, RELATIONS_FILE, TRIPLES_FILE, KnowledgeGraph
from poikg.recommender_eval import PipelineArtifacts, PipelineConfig
from poikg.transr import TrainConfig, TransRModel, read_loss_trace, write_loss_trace

TRAIN_FILE = "train.csv"
TEST_FILE = "test.csv"
SPLIT_FILE = "split.json"
DATA_CONFIG_FILE = "data_config.json"
REGIONS_FILE = "regions.json"
TRANSR_FILE = "transr.npz"
TRANSR_LOSS_FILE = "transr_loss.csv"
CANDIDATES_FILE = "candidates.tsv"
FACTORS_FILE = "factors.npz"
MF_OBJECTIVE_FILE = "mf_objective.csv"
RECOMMENDATIONS_FILE = "recommendations.tsv"
METRICS_FILE = "metrics.csv"
GROUND_TRUTH_FILE = "ground_truth.tsv"
SWEEP_TIMESLOT_FILE = "sweep_timeslot.csv"
SWEEP_DIM_FILE = "sweep_dim.csv"
SPARSITY_FILE = "sparsity.csv"

# Command that writes each stage input.
PRODUCERS = {
    TRAIN_FILE: "ingest",
    TEST_FILE: "ingest",
    SPLIT_FILE: "ingest",
    DATA_CONFIG_FILE: "build-graph",
    REGIONS_FILE: "build-graph",
    ENTITIES_FILE: "build-graph",
    RELATIONS_FILE: "build-graph",
    TRIPLES_FILE: "build-graph",
    RELATION_SPACE_FILE: "build-graph",
    TRANSR_FILE: "train-embed",
    TRANSR_LOSS_FILE: "train-embed",
    CANDIDATES_FILE: "extract",
    FACTORS_FILE: "train-mf",
    MF_OBJECTIVE_FILE: "train-mf",
}

GRAPH_FILES = (DATA_CONFIG_FILE, REGIONS_FILE, ENTITIES_FILE, RELATIONS_FILE, TRIPLES_FILE)


class State:
    """
    Paths and loaders for one artifact directory.
    """

    def __init__(self, out_dir: str):
        self.out_dir = os.path.expanduser(out_dir)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def exists(self, name: str) -> bool:
        return os.path.isfile(self.path(name))

    def require(self, *names: str):
        """
        Raises:
            DataError: naming the first missing artifact and the command that writes it.
        """
        for name in names:
            if not self.exists(name):
                producer = PRODUCERS.get(name)
                hint = f"; run `poikgcli {producer}` first" if producer else ""
                raise DataError(f"Missing artifact {self.path(name)}{hint}")

    def ensure_dir(self) -> "State":
        os.makedirs(self.out_dir, exist_ok=True)
        return self

    # Split.

    def save_split(self, split: SplitDataset):
        self.ensure_dir()
        write_checkins(split.train, self.path(TRAIN_FILE))
        write_checkins(split.test, self.path(TEST_FILE))
        with open(self.path(SPLIT_FILE), "w") as f:
            json.dump(
                {
                    "cutoff_timestamp": split.cutoff_timestamp,
                    "n_train": len(split.train),
                    "n_test": len(split.test),
                    "train_fraction": split.train_fraction,
                },
                f,
            )

    def load_split(self) -> SplitDataset:
        self.require(TRAIN_FILE, TEST_FILE, SPLIT_FILE)
        with open(self.path(SPLIT_FILE), "r") as f:
            meta = json.load(f)
        fmt = CheckinFormat(header=True)
        train = list(parse_checkins(self.path(TRAIN_FILE), fmt))
        # An empty test side is legal; parse_checkins rejects empty files.
        test = list(parse_checkins(self.path(TEST_FILE), fmt)) if meta["n_test"] else []
        return SplitDataset(train=train, test=test, cutoff_timestamp=float(meta["cutoff_timestamp"]))

    # Graph.

    def save_graph(self, graph: KnowledgeGraph, regions: RegionModel, data: DataConfig):
        self.ensure_dir()
        graph.save(self.out_dir)
        regions.save(self.path(REGIONS_FILE))
        with open(self.path(DATA_CONFIG_FILE), "w") as f:
            json.dump(data.model_dump(), f)

    def load_data_config(self) -> DataConfig:
        self.require(DATA_CONFIG_FILE)
        with open(self.path(DATA_CONFIG_FILE), "r") as f:
            return DataConfig.from_config(json.load(f))

    def load_graph(self) -> Tuple[KnowledgeGraph, RegionModel, DataConfig]:
        self.require(*GRAPH_FILES)
        return KnowledgeGraph.load(self.out_dir), RegionModel.load(self.path(REGIONS_FILE)), self.load_data_config()

    # Embeddings.

    def save_transr(self, model: TransRModel, loss_trace: List[float], cfg: TrainConfig):
        self.ensure_dir()
        model.save(self.path(TRANSR_FILE), cfg)
        write_loss_trace(loss_trace, self.path(TRANSR_LOSS_FILE))

    def load_transr(self) -> Tuple[TransRModel, Optional[TrainConfig], List[float]]:
        self.require(TRANSR_FILE, TRANSR_LOSS_FILE)
        model, cfg = TransRModel.load(self.path(TRANSR_FILE))
        return model, cfg, read_loss_trace(self.path(TRANSR_LOSS_FILE))

    # Candidates and factors.

    def save_candidates(self, candidates: CandidateSet, graph: KnowledgeGraph):
        self.ensure_dir()
        candidates.save(self.path(CANDIDATES_FILE), graph)

    def load_candidates(self, graph: KnowledgeGraph) -> CandidateSet:
        self.require(CANDIDATES_FILE)
        return CandidateSet.load(self.path(CANDIDATES_FILE), graph)

    def save_factors(self, factors: FactorModel, st_trace: List[float], pref_trace: List[float]):
        self.ensure_dir()
        factors.save(self.path(FACTORS_FILE))
        n = max(len(st_trace), len(pref_trace))
        pd.DataFrame(
            {
                "epoch": range(n),
                "st_objective": pd.Series(st_trace, dtype=float).reindex(range(n)),
                "pref_objective": pd.Series(pref_trace, dtype=float).reindex(range(n)),
            },
            columns=["epoch", "st_objective", "pref_objective"],
        ).to_csv(self.path(MF_OBJECTIVE_FILE), index=False, float_format="%.17g")

    def load_factors(self) -> Tuple[FactorModel, List[float], List[float]]:
        self.require(FACTORS_FILE, MF_OBJECTIVE_FILE)
        trace = pd.read_csv(self.path(MF_OBJECTIVE_FILE))
        return (
            FactorModel.load(self.path(FACTORS_FILE)),
            trace["st_objective"].dropna().astype(float).tolist(),
            trace["pref_objective"].dropna().astype(float).tolist(),
        )

    def load_pipeline(self, cfg: PipelineConfig) -> PipelineArtifacts:
        """
        Reassembles a fitted pipeline from disk.

        The data and TransR sections are the ones the stored artifacts were
        built with; the remaining sections come from ``cfg``.
        """
        split = self.load_split()
        graph, regions, data = self.load_graph()
        transr, transr_cfg, loss_trace = self.load_transr()
        candidates = self.load_candidates(graph)
        factors, st_trace, pref_trace = self.load_factors()
        if factors.users != graph.vocab.users or factors.pois != graph.vocab.pois:
            raise DataError("Stored factors do not match the stored graph; rerun `poikgcli train-mf`")
        cfg = cfg.model_copy(update={"data": data, "transr": transr_cfg or cfg.transr})
        poikg.logging.debug(f"Loaded pipeline artifacts from {self.out_dir}")
        return PipelineArtifacts(
            cfg=cfg,
            train=split.train,
            regions=regions,
            graph=graph,
            transr=transr,
            loss_trace=loss_trace,
            homes=fit_home_locations(split.train),
            poi_coords=poi_coordinates(split.train),
            candidates=candidates,
            factors=factors,
            st_trace=st_trace,
            pref_trace=pref_trace,
        )
