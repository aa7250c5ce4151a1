"""Handover-rate analysis and Monte Carlo validation for distributed-MIMO
AP selection: hybrid scalable cell-free, CoMP-JT and pure UE-centric."""

from .analytics import (
    RateResult,
    f_k_distance_pdf,
    h_ap_comp,
    h_ap_hybrid_closed,
    h_ap_pue,
    h_c_comp,
    h_c_hybrid_closed,
    h_c_hybrid_exact,
    length_intensity_exact,
    mu1_hybrid_closed,
    rates_for,
)
from .errors import (
    ConfigurationError,
    InsufficientPointsError,
    NumericError,
    ParameterError,
    RegimeWarning,
)
from .geometry import (
    Deployment,
    NetworkParams,
    Rect,
    ServingSet,
    assign_clusters,
    buffon_square_grid_crossing_prob,
    k_closest,
    make_deployment,
    sample_deployment,
    sample_ppp,
    serving_set,
)
from .mobility import Trajectory, generate_trajectory

__all__ = [name for name in dir() if not name.startswith("_")]
