"""Conditional linear-Gaussian Bayesian networks for longitudinal difference data."""

__version__ = "0.1.0"

from .averaging import (
    ArcStrengthTable,
    AveragingResult,
    BootstrapResult,
    arc_strengths,
    average_network,
    bootstrap_dags,
    consensus,
    estimate_threshold,
    l1_threshold,
)
from .clg import (
    ClgNetwork,
    DiscreteBlock,
    GaussianBlock,
    LocalDiscrete,
    LocalGaussian,
    LocalScorer,
    bic_score,
    fit_parameters,
    log_likelihood,
    model_from_json,
    model_to_json,
)
from .corrnet import CorrelationMatrix, UndirectedGraph, correlation_network, pearson
from .dataset import (
    DeltaDataset,
    LongitudinalTable,
    ReferenceAtlas,
    SubjectRecord,
    TableSchema,
    adjust_with_atlas,
    compute_deltas,
    load_atlas,
    load_table,
)
from .errors import (
    CollinearityError,
    ConstraintError,
    CycleError,
    DataError,
    DeltaBnError,
    InfeasibleEvidenceError,
    InsufficientDataError,
    SearchOverflowError,
    UndefinedCorrelationError,
)
from .graph import (
    ArcConstraints,
    Dag,
    dag_from_json,
    dag_to_json,
    default_constraints,
    is_acyclic,
    to_dot,
    topological_order,
)
from .inference import (
    Evidence,
    Interval,
    QueryResult,
    expectation,
    intervene,
    parse_evidence,
    predict_node,
    query,
    simulate,
)
from .search import Move, SearchTrace, best_move_oracle, hill_climb, legal_moves
from .validation import CvReport, SubgroupResult, cross_validate, subgroup_networks
