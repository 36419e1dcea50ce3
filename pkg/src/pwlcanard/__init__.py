"""Numerical toolkit for canard cycles in a piecewise-linear slow-fast oscillator."""
from __future__ import annotations

from .canard import (
    Connection,
    R3z,
    R4z,
    RFunctionValue,
    WidthSolve,
    a_tilde_series,
    connection_residual,
    cycle_for_width,
    flight_times,
    hstar_root,
    hstar_series,
    maximal_canard,
    saddle_node_k_for_width,
    tau_C_series,
)
from .continuation import Branch, BranchPoint, Fold, HopfCheck, detect_folds, hopf_check, trace_branch
from .errors import CaptureError, ConvergenceError, NumericalError
from .linflow import Orbit, OrbitEvent, flow, integrate_orbit, rk4_oracle
from .model import (
    EquilibriumInfo,
    Landmarks,
    Params,
    equilibrium_stability,
    landmarks,
    nullcline_f,
    slow_manifold,
    zone_data,
    zones_at,
)
from .poincare import (
    CycleRecord,
    fd_multiplier,
    fixed_points,
    multiplier,
    phi,
    phi_inverse,
    return_map,
    section_line,
)

__all__ = [
    "Branch",
    "BranchPoint",
    "CaptureError",
    "Connection",
    "ConvergenceError",
    "CycleRecord",
    "EquilibriumInfo",
    "Fold",
    "HopfCheck",
    "Landmarks",
    "NumericalError",
    "Orbit",
    "OrbitEvent",
    "Params",
    "R3z",
    "R4z",
    "RFunctionValue",
    "WidthSolve",
    "a_tilde_series",
    "connection_residual",
    "cycle_for_width",
    "detect_folds",
    "equilibrium_stability",
    "fd_multiplier",
    "fixed_points",
    "flight_times",
    "flow",
    "hopf_check",
    "hstar_root",
    "hstar_series",
    "integrate_orbit",
    "landmarks",
    "maximal_canard",
    "multiplier",
    "nullcline_f",
    "phi",
    "phi_inverse",
    "return_map",
    "rk4_oracle",
    "saddle_node_k_for_width",
    "section_line",
    "slow_manifold",
    "tau_C_series",
    "trace_branch",
    "zone_data",
    "zones_at",
]
__version__ = "0.1.0"
