"""Large-deviations calibrated sliding-window changepoint detection for
Gaussian ARMA processes."""

from .arma import (
    ArmaModel,
    ChangeInjection,
    CovarianceContext,
    autocovariance,
    build_context,
    long_run_variance,
    partial_sum_variance,
    psi_weights,
    script_T_limit,
    simulate,
    t_sum,
    validate,
)
from .detector import DetectorConfig, SequentialResult, WindowDecision, run_sequential, test_window
from .errors import ChangepointError
from .experiments import (
    ExperimentPlan,
    ExperimentReport,
    basic_experiment,
    coefficient_sweep,
    convergence_diagnostic,
    sensitivity_sweep,
)
from .likelihood import (
    GaussianPair,
    MeanShift,
    ScaleChange,
    VarianceChange,
    legendre,
    log_likelihood_ratio,
    mgf_general,
)
from .thresholds import (
    ThresholdCurve,
    b_mean_change,
    b_scale_change,
    b_variance_change,
    gamma_from_alpha,
    threshold_curve,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
