"""Variance reduction of OLS estimators under sequential augmentation of
heteroscedastic linear regression data."""

__version__ = "0.1.0"

from .decomposition import (
    Decomposition,
    VrpVerdict,
    decompose,
    decompose_correlated,
    leverage,
    ols_covariance,
    plackett_update,
    vrp_partial_sums,
    w11_equal_variance,
)
from .errors import *  # noqa: F401,F403
from .model import AugmentedProblem, DesignMatrix, NoiseModel, augment, line_design, validate_design, validate_noise
from .planner import AdmissibleRegion, admissible_next_general, admissible_next_line
from .simulate import SearchConfig, monte_carlo, search_counterexamples
from .straightline import (
    alphas,
    check_conditions,
    driving_roots,
    leverage_line,
    lemma_diagnostics,
    summarize,
    two_point_values,
    w11_diag_line,
)
