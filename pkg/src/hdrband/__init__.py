"""Kernel highest-density-region estimation with HDR-tailored bandwidths."""

from .density import DensityCurve, EvaluationGrid, kde_evaluate, kde_on_grid, linear_bin
from .estimator import KernelHDR
from .exceptions import (
    CrossingError,
    DegenerateLevelError,
    HDRError,
    NoInteriorMinimumError,
    PipelineError,
)
from .hdr import (
    CrossingSet,
    IntervalUnion,
    extract_region,
    find_crossings,
    kde_hdr,
    level_for_tau,
    symmetric_difference_mass,
)
from .kernel import KernelConstants, gaussian_derivative, kernel_constants
from .models import PRESETS, HdrOracle, NormalMixture, get_model, hdr_oracle, mixture_sample
from .risk import (
    RiskCoefficients,
    asymptotic_risk_AR,
    asymptotic_risk_in_h,
    compare_selectors,
    minimize_AR,
    monte_carlo_risk,
    risk_coefficients,
)
from .selector import (
    SelectorConfig,
    SelectorReport,
    hdr_bandwidth,
    lscv_bandwidth,
    psi_kernel_estimate,
    psi_normal_scale,
    robust_scale,
)

__version__ = "0.1.0"
