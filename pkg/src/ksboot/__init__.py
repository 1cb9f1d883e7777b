"""Bootstrap Kolmogorov-Smirnov goodness-of-fit tests for stationary series.

The headline test resamples circular blocks to preserve serial dependence
and recenters the bootstrap goodness-of-fit process so that unspecified
marginal parameters do not distort the null distribution.  Baselines
(iid nonparametric, parametric, and a semiparametric AR(1) working-model
bootstrap) share the same interfaces, alongside a Monte Carlo size/power
harness and a daily-returns analysis pipeline.
"""

__version__ = "0.1.0"

from .edf import Ecdf, StepAverage, StepCorrection, corrected_sup, ks_statistic
from .errors import KsbootError
from .families import Family, Gamma, Normal, StudentT, TruncatedBelow
from .gof import GofResult, bootstrap_ecdf_mean, npb_test, npbb_test, pb_test, spb_test
from .resampling import (
    BootstrapPlan,
    circular_blocks,
    cube_root_block,
    draw_block_resample,
    draw_iid_resample,
    politis_white_block,
)
from .tsgen import Ar1Spec, gen_ar1, kendall_tau_lag1, phi_for_tau, transform_margin

__all__ = [
    "__version__",
    "Ecdf",
    "StepAverage",
    "StepCorrection",
    "corrected_sup",
    "ks_statistic",
    "KsbootError",
    "Family",
    "Gamma",
    "Normal",
    "StudentT",
    "TruncatedBelow",
    "GofResult",
    "bootstrap_ecdf_mean",
    "npb_test",
    "npbb_test",
    "pb_test",
    "spb_test",
    "BootstrapPlan",
    "circular_blocks",
    "cube_root_block",
    "draw_block_resample",
    "draw_iid_resample",
    "politis_white_block",
    "Ar1Spec",
    "gen_ar1",
    "kendall_tau_lag1",
    "phi_for_tau",
    "transform_margin",
]
