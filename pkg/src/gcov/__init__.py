"""Generalized covariance (GCov) estimation for semi-parametric dynamic models."""

__version__ = "0.1.0"

from .diagnostics import TestReport, acf, residual_based_test, sur_xi, weak_wn_test
from .errors import GcovError, NoConvergence
from .estimator import (
    EstimationResult,
    GcovOptions,
    asymptotic_covariance,
    autocov_jacobian,
    gcov_estimate,
    gcov_objective,
    identification_rank,
)
from .models import (
    ModelSpec,
    ThetaVector,
    Transform,
    apply_transforms,
    ar_arch_model,
    mar_model,
    model_residuals,
    var_model,
)
from .simulation import (
    MonteCarloTable,
    rng_stream,
    run_monte_carlo,
    sample_student_t,
    simulate_ar_arch,
    simulate_mar,
)
from .stats import (
    canonical_correlations_sq,
    chi2_sf,
    portmanteau_xi,
    sample_autocov,
    trace_r2,
    vec_kron_quadform,
)
