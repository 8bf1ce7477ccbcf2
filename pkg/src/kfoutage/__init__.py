"""Outage of the Kalman-filter error variance for scalar Gauss-Markov
signals observed over i.i.d. fading channels."""

__version__ = "0.1.0"

from .bounds import (
    KappaBounds,
    OutageReport,
    a_kappa,
    high_snr_outage,
    kappa_bounds,
    kappa_taylor,
    outage_bounds,
    outage_closed_form,
    outage_report,
)
from .density import (
    DensityGrid,
    SolveReport,
    apply_transfer_operator,
    build_grid,
    kappa_from_density,
    outage_from_density,
    solve_stationary,
    write_density_csv,
)
from .estimators import MonteCarloIEV, StationaryIEVDensity
from .exceptions import (
    BoundClampedWarning,
    DegenerateChannel,
    InsufficientSamples,
    KFOutageError,
    NoConvergence,
    NonPositiveVariance,
    ParameterError,
    RhoZeroWarning,
    ThresholdAboveBreakpoint,
    UnstableSystem,
)
from .model import (
    ChannelModel,
    ConstantChannel,
    CustomChannel,
    FilterState,
    RayleighChannel,
    SystemParams,
    check_params,
    kalman_step,
    m_max,
    sample_snr,
    validate_params,
    variance_step,
)
from .montecarlo import (
    EmpiricalDistribution,
    Trajectory,
    empirical_distribution,
    estimate_outage_mc,
    simulate_chain,
    stationarity_check,
    verify_conditional_mse,
)

__all__ = [
    "a_kappa",
    "apply_transfer_operator",
    "BoundClampedWarning",
    "build_grid",
    "ChannelModel",
    "check_params",
    "ConstantChannel",
    "CustomChannel",
    "DegenerateChannel",
    "DensityGrid",
    "empirical_distribution",
    "EmpiricalDistribution",
    "estimate_outage_mc",
    "FilterState",
    "high_snr_outage",
    "InsufficientSamples",
    "kalman_step",
    "kappa_bounds",
    "kappa_from_density",
    "kappa_taylor",
    "KappaBounds",
    "KFOutageError",
    "m_max",
    "MonteCarloIEV",
    "NoConvergence",
    "NonPositiveVariance",
    "outage_bounds",
    "outage_closed_form",
    "outage_from_density",
    "outage_report",
    "OutageReport",
    "ParameterError",
    "RayleighChannel",
    "RhoZeroWarning",
    "sample_snr",
    "simulate_chain",
    "solve_stationary",
    "SolveReport",
    "stationarity_check",
    "StationaryIEVDensity",
    "SystemParams",
    "ThresholdAboveBreakpoint",
    "Trajectory",
    "UnstableSystem",
    "validate_params",
    "variance_step",
    "verify_conditional_mse",
    "write_density_csv",
]
