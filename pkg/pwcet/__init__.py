"""Chebyshev-envelope pWCET estimation (MEMIK, ATAN, TANH)."""

from .bounds import (
    UNREACHABLE,
    BoundParams,
    GridSettings,
    Method,
    ParamGrid,
    PwcetCurve,
    build_pwcet_curve,
    estimate_wcet,
    eval_bound,
    invert_bound,
    make_bound_curve,
    restrict_params,
)
from .empirical import Family, SampleSet, empirical_ccdf, load_samples, moment_power_k, moment_transformed
from .errors import ComputationError, InputError, PwcetError

__version__ = "0.1.0"
