"""Two-stage interpretable matching for causal effect estimation.

Exact matching on coarsened covariates with importance-ordered relaxation,
followed by a mixed continuous/discrete distance that weights controls
inside each stratum.
"""

__version__ = "0.1.0"

from timatch.dataset import (  # noqa: E402
    CoarsenedView,
    CovariateKind,
    Dataset,
    coarsen,
    discretize_for_distance,
    load_csv,
)
from timatch.estimator import CateEstimate, estimate_cate  # noqa: E402
from timatch.imbalance import compute_l1, default_binning  # noqa: E402
from timatch.importance import ImportanceVector, compute_importance  # noqa: E402
from timatch.matcher import MatchResult, Stratum, run_matching  # noqa: E402
from timatch.pipeline import PipelineOptions, run_pipeline  # noqa: E402

__all__ = [
    "CateEstimate",
    "CoarsenedView",
    "CovariateKind",
    "Dataset",
    "ImportanceVector",
    "MatchResult",
    "PipelineOptions",
    "Stratum",
    "coarsen",
    "compute_importance",
    "compute_l1",
    "default_binning",
    "discretize_for_distance",
    "estimate_cate",
    "load_csv",
    "run_matching",
    "run_pipeline",
]
