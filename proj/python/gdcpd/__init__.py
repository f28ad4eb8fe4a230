"""Change-point detection, boundary monitoring and remaining-life estimation.

The heavy lifting lives in the compiled extension; this package simply
re-exports its public surface.
"""

from ._core import (
    ChangePointResult,
    GpRegressor,
    MonitorConfig,
    OnlineMonitor,
    RulNetwork,
    detect,
    estimate_cov_inv,
    jnr,
    mahalanobis,
    offline_threshold,
    rbf_eval,
    rbf_grad_second_arg,
    rbf_hessian_mixed,
    rmse,
    scenario_names,
    score_function,
    simulate_scenario,
    stopping_time,
    weighted_mahalanobis,
    wmd_series,
)

__version__ = "0.1.0"

__all__ = [
    "ChangePointResult",
    "GpRegressor",
    "MonitorConfig",
    "OnlineMonitor",
    "RulNetwork",
    "detect",
    "estimate_cov_inv",
    "jnr",
    "mahalanobis",
    "offline_threshold",
    "rbf_eval",
    "rbf_grad_second_arg",
    "rbf_hessian_mixed",
    "rmse",
    "scenario_names",
    "score_function",
    "simulate_scenario",
    "stopping_time",
    "weighted_mahalanobis",
    "wmd_series",
]
