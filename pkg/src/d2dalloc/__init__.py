"""Utility-maximizing uplink reuse for D2D pairs under cellular QoS margins."""

from .baseline import (
    BaselineInfeasibleError,
    ChannelAlloc,
    RateTable,
    build_rate_table,
    waterfill_bandwidth,
)
from .dual import (
    AllocationMetrics,
    Association,
    Prices,
    SolveReport,
    StepState,
    best_response_multi,
    best_response_single,
    dual_subgradient,
    dual_value,
    evaluate_allocation,
    recover_feasible,
    solve_distributed,
    step_size,
    update_prices,
)
from .model import (
    SystemParams,
    UtilityCurve,
    channel_gain,
    interference_budget,
    rate_cellular_clean,
    rate_cellular_interfered,
    rate_d2d,
    utility,
    utility_inv,
)
from .oracles import OracleResult, solve_binary_oracle, solve_centralized_relaxed
from .scenario import LinkGains, Topology, compute_link_gains, generate_topology

__version__ = "0.1.0"

__all__ = [
    "AllocationMetrics",
    "Association",
    "BaselineInfeasibleError",
    "ChannelAlloc",
    "LinkGains",
    "OracleResult",
    "Prices",
    "RateTable",
    "SolveReport",
    "StepState",
    "SystemParams",
    "Topology",
    "UtilityCurve",
    "best_response_multi",
    "best_response_single",
    "build_rate_table",
    "channel_gain",
    "compute_link_gains",
    "dual_subgradient",
    "dual_value",
    "evaluate_allocation",
    "generate_topology",
    "interference_budget",
    "rate_cellular_clean",
    "rate_cellular_interfered",
    "rate_d2d",
    "recover_feasible",
    "solve_binary_oracle",
    "solve_centralized_relaxed",
    "solve_distributed",
    "step_size",
    "update_prices",
    "utility",
    "utility_inv",
    "waterfill_bandwidth",
]
