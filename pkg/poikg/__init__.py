__version__ = "0.1.0"

import rich

from .config import Config, ConfigSection

# Rich console.
__console__ = rich.get_console()
__use_console__ = True


def turn_console_off():
    global __use_console__
    global __console__
    from io import StringIO

    __use_console__ = False
    rich.reconfigure(file=StringIO(), stderr=False)


def turn_console_on():
    global __use_console__
    global __console__
    __use_console__ = True
    __console__ = rich.get_console()


from .errors import (
    CandidateIndexError,
    CheckinFormatError,
    ConfigError,
    DataError,
    DimensionMismatchError,
    DivergenceError,
    EmptyCandidatePoolError,
    EmptyCandidateSetError,
    MissingCoordinatesError,
    NegativeSamplingError,
    PoikgError,
    RegionError,
    SplitError,
    UnknownEntityError,
    UnknownRelationError,
)
from .logging import logging
from .checkin_data import (
    CheckIn,
    CheckinFormat,
    DataConfig,
    FrequencyMatrix,
    HomeLocation,
    RegionModel,
    SplitDataset,
    TimeSlotSpec,
    assign_region,
    assign_time_slot,
    build_frequency_matrix,
    cluster_regions,
    fit_home_location,
    fit_home_locations,
    parse_checkins,
    poi_coordinates,
    split_by_date,
)
from .kg_builder import (
    EntityVocab,
    KnowledgeGraph,
    NegativeSampler,
    RelationPathId,
    RelationVocab,
    build_graph,
    compose_relation_id,
    sample_negatives,
)
from .transr import (
    TrainConfig,
    TransRModel,
    compose_relation_embedding,
    enforce_norm_constraints,
    grad_step,
    init_model,
    margin_loss,
    project_entity,
    score,
    train,
)
from .candidate_extraction import (
    CandidateSet,
    ExtractionConfig,
    extract,
    filter_by_distance,
    haversine_km,
    prune_by_score,
    rank_pairs,
)
from .combined_mf import FactorModel, MFConfig, combine, fit_combined_mf, predict_pref, predict_st, train_mf
from .recommender_eval import (
    EvalConfig,
    MetricsReport,
    PipelineConfig,
    Query,
    RecommendationList,
    SyntheticSpec,
    evaluate,
    f1_at_k,
    fit_pipeline,
    generate_synthetic,
    precision_at_k,
    recall_at_k,
    recommend_topk,
    run_dim_sweep,
    run_sparsity_experiment,
    run_timeslot_sweep,
)
from .state import State
from .cli import cli as cli, COMMANDS as ALL_COMMANDS


# Logging helpers.
def trace(on: bool = True):
    logging.set_trace(on)


def debug(on: bool = True):
    logging.set_debug(on)


configs = [
    DataConfig.config(),
    TrainConfig.config(),
    ExtractionConfig.config(),
    MFConfig.config(),
    EvalConfig.config(),
    logging.config(),
]
defaults = Config.merge_all(configs)
