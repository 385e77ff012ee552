"""Maximum likelihood fitting of linear Gaussian state-space models with
exact gradients and Hessians from a differential Kalman filter, and the
information criteria AIC and GIC/TIC."""

__version__ = "0.1.0"

from .core import FilterInit, FilterStep, ModelSpec, ParameterVector, TimeSeries, validate_model
from .criteria import CriteriaReport, compare_models, fisher_information, gic, neg_hessian_estimate
from .diff_filter import LikelihoodEvaluation, gradient_filter, hessian_filter
from .kalman import FilterDivergenceError, FilterOutput, brute_force_loglik, filter, loglik
from .models import (
    SeasonalArConfig,
    SeasonalConfig,
    TrendConfig,
    build_seasonal,
    build_seasonal_ar,
    build_trend,
    simulate,
)
from .optimize import FitResult, OptimizerConfig, fit, multi_start_fit
from .oracle import FdConfig, fd_gradient, fd_hessian
