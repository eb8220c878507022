"""Two-stage change-point detection for performance-test time series.

The detector scans a series for Bayesian change-point candidates and
confirms them with a penalized kernel-cost segmentation restricted to those
candidates.  Around it: a canonical dataset format with TCPD import, a
margin-matched evaluation harness, a seeded parameter tuner, and a
human-in-the-loop feedback service with a review UI.
"""

__version__ = "0.1.0"

from .bayes import (
    BayesCandidate,
    BayesScanConfig,
    CandidateStatus,
    Distribution,
    PriorSpec,
    StepFunction,
    log_bayes_factor,
    log_gamma,
    log_marginal_h1,
    log_marginal_h2,
    refine_candidates,
    scan_series,
)
from .data import (
    AnnotationSet,
    ChangePointSet,
    Dataset,
    TimeSeries,
    generate_quality_control,
    load_dataset,
    save_dataset,
)
from .metrics import (
    AggregateReport,
    EvalConfig,
    EvalReport,
    consensus,
    evaluate,
    evaluate_dataset,
    f1,
    match_true_positives,
    precision,
    recall,
)
from .pelt import (
    BandwidthMode,
    PeltConfig,
    Segmentation,
    median_heuristic_bandwidth,
    pelt,
    pelt_constrained,
    segment_cost_rbf,
)
from .pipeline import (
    BatchResult,
    BipecConfig,
    DetectionResult,
    config_fingerprint,
    config_from_dict,
    config_to_dict,
    detect,
    detect_batch,
    detect_bayes_only,
    detect_pelt_only,
)
from .preprocess import (
    MissingPolicy,
    PreprocessConfig,
    fill_missing,
    preprocess,
    remove_outliers,
    smooth,
    standardize,
)
from .tcpd import import_tcpd
from .tuning import SearchSpace, TuneReport, objective, tune

__all__ = [
    "AggregateReport",
    "AnnotationSet",
    "BandwidthMode",
    "BatchResult",
    "BayesCandidate",
    "BayesScanConfig",
    "BipecConfig",
    "CandidateStatus",
    "ChangePointSet",
    "Dataset",
    "DetectionResult",
    "Distribution",
    "EvalConfig",
    "EvalReport",
    "MissingPolicy",
    "PeltConfig",
    "PreprocessConfig",
    "PriorSpec",
    "SearchSpace",
    "Segmentation",
    "StepFunction",
    "TimeSeries",
    "TuneReport",
    "config_fingerprint",
    "config_from_dict",
    "config_to_dict",
    "consensus",
    "detect",
    "detect_batch",
    "detect_bayes_only",
    "detect_pelt_only",
    "evaluate",
    "evaluate_dataset",
    "f1",
    "generate_quality_control",
    "import_tcpd",
    "load_dataset",
    "log_bayes_factor",
    "log_gamma",
    "log_marginal_h1",
    "log_marginal_h2",
    "match_true_positives",
    "median_heuristic_bandwidth",
    "objective",
    "pelt",
    "pelt_constrained",
    "precision",
    "preprocess",
    "recall",
    "refine_candidates",
    "save_dataset",
    "scan_series",
    "segment_cost_rbf",
    "smooth",
    "standardize",
    "tune",
]
