"""replicadetect: find groups of approximately replicate features of a
high-dimensional vector under a latent factor model, select pure
variables, and estimate the loading matrix."""

from .corr import (
    CorrelationModel,
    DataMatrix,
    DeviationRate,
    delta_n,
    load_csv,
    sample_correlation,
)
from .errors import ReplicaDetectError
from .loadings import (
    FactorEstimate,
    align_signed_permutation,
    estimate_a,
    estimate_bj_plugin,
    estimate_pure_loadings,
    estimate_sigma_z,
    min_signed_permutation_distance,
)
from .parallel import GroupPartition, find_parallel, partition_sizes_monotone_check
from .pipeline import FitConfig, FitResult, fit, fit_from_correlation, pvs
from .prune import (
    PruneTrace,
    ThetaEstimate,
    estimate_theta,
    prune_greedy,
    schur_complement_diag,
)
from .rank import (
    LowRankEstimate,
    RepresentativeSet,
    estimate_k,
    estimate_m,
    select_representatives,
)
from .score import ScoreTable, row_leave_two_out, score_s2, score_sq, score_table
from .simgen import (
    MetricReport,
    SimScenario,
    evaluate,
    factor_correlation,
    generate,
    run_replicates,
)
from .tuning import CvConfig, cv_delta, cv_rank, prescreen

__version__ = "0.1.0"

__all__ = [
    "CorrelationModel",
    "CvConfig",
    "DataMatrix",
    "DeviationRate",
    "FactorEstimate",
    "FitConfig",
    "FitResult",
    "GroupPartition",
    "LowRankEstimate",
    "MetricReport",
    "PruneTrace",
    "ReplicaDetectError",
    "RepresentativeSet",
    "ScoreTable",
    "SimScenario",
    "ThetaEstimate",
    "align_signed_permutation",
    "cv_delta",
    "cv_rank",
    "delta_n",
    "estimate_a",
    "estimate_bj_plugin",
    "estimate_k",
    "estimate_m",
    "estimate_pure_loadings",
    "estimate_sigma_z",
    "estimate_theta",
    "evaluate",
    "factor_correlation",
    "find_parallel",
    "fit",
    "fit_from_correlation",
    "generate",
    "load_csv",
    "min_signed_permutation_distance",
    "partition_sizes_monotone_check",
    "prescreen",
    "prune_greedy",
    "pvs",
    "row_leave_two_out",
    "run_replicates",
    "sample_correlation",
    "schur_complement_diag",
    "score_s2",
    "score_sq",
    "score_table",
    "select_representatives",
]
