"""Analytical performance modeling and design-space exploration for

training large language models on parameterized data centers.
"""

from .errors import Infeasible, InvalidModel, InvalidStrategy, LlmcdError
from .hardware import SystemSpec, flop_eff, hbm_eff, op_time
from .memcap import (Feasibility, MemoryFootprint, feasible, footprint,
                     min_gpus_for_state, state_bytes_per_param)
from .model import (ModelSpec, OpProfile, ParamCounts, build_layer_graph,
                    count_params, flops_per_token)
from .schedule import RunEstimate, Strategy, estimate, estimate_detail
from .search import SearchResult, SearchRow, enumerate_strategies, search

__all__ = [
    "Feasibility", "Infeasible", "InvalidModel", "InvalidStrategy",
    "LlmcdError", "MemoryFootprint", "ModelSpec", "OpProfile", "ParamCounts",
    "RunEstimate", "SearchResult", "SearchRow", "Strategy", "SystemSpec",
    "build_layer_graph", "count_params", "enumerate_strategies", "estimate",
    "estimate_detail", "feasible", "flop_eff", "flops_per_token",
    "footprint", "hbm_eff", "min_gpus_for_state", "op_time", "search",
    "state_bytes_per_param",
]

__version__ = "0.1.0"
