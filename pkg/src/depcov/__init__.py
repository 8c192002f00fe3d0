"""Distance covariance, Brownian covariance via Schauder expansions, and
permutation tests of independence and nonlinearity."""
from .basis import (
    BasisSpec,
    CoefficientMatrix,
    DependenceMap,
    MapCell,
    brownian_cov_truncated,
    coefficient_matrix,
    dependence_map,
    haar,
    rescale_sample,
    schauder,
    schauder_matrix,
    uv_cov_sq,
)
from .data import (
    CenteredMatrix,
    ConstantColumnError,
    DataError,
    DistanceMatrix,
    PairedSample,
    double_center,
    load_paired_csv,
    pairwise_distances,
    rescale_unit_interval,
)
from .dcov import (
    DcovResult,
    dcov_sq,
    dcov_sq_fast,
    dcov_sq_naive,
    nonlinearity_statistic,
    residual_projection,
)
from .inference import TestResult, nonlinearity_test, permutation_test

__version__ = "0.1.0"
