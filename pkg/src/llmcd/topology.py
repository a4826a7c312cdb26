"""Parallel-group placement and collective communication cost.

Ranks are laid out with TP/ES innermost (the attention and expert views of
the same innermost block), then EP, then PP, then the data-parallel dims
outermost.  A group lands on the scale-up tier when the block of ranks it
spans fits inside one high-bandwidth domain, otherwise on scale-out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .hardware import SystemSpec

COLLECTIVE_KINDS = ("allreduce", "reduce_scatter", "all_gather", "all_to_all", "p2p")

# Hardware-offloaded collectives (in-network reduction) move less data.
HW_ALLREDUCE_FACTOR = 2.0
HW_RS_AG_FACTOR = 1.5
# Software collectives burn GPU cycles on top of wire time; never overlapped.
SW_GPU_OVERHEAD = 0.13


@dataclass(frozen=True)
class CommEvent:
    """One collective on one group, payload in bytes per participant."""

    kind: str
    payload_bytes: float
    group_size: int

    def __post_init__(self):
        assert self.kind in COLLECTIVE_KINDS, self.kind
        assert self.group_size >= 1
        assert self.payload_bytes >= 0


@dataclass(frozen=True)
class TierChoice:
    tier: str           # "su" | "so"
    bw: float           # bytes/s per GPU
    base_latency: float  # seconds per hop
    hops: int


@dataclass(frozen=True)
class PlacedGroup:
    dim: str
    size: int
    span: int           # contiguous ranks the group stretches across
    tier: TierChoice


@dataclass(frozen=True)
class CollectiveCost:
    wire_t: float
    gpu_overhead_t: float  # exposed GPU cycles for software collectives


def group_spans(strategy, total_gpus: int) -> dict:
    """Contiguous rank span of each parallel dimension's groups."""
    st = strategy
    inner = max(st.tp, st.es * st.ep)   # footprint of one pipeline stage slice
    return {
        "tp": st.tp,
        "es": st.es,
        "ep": st.es * st.ep,
        "pp": min(total_gpus, inner * st.pp) if st.pp > 1 else 1,
        "dp": total_gpus if st.dp > 1 else 1,
        "dp_exp": total_gpus if st.dp_exp > 1 else 1,
    }


def tier_for_span(sys: SystemSpec, span: int) -> TierChoice:
    if sys.topology == "full_flat":
        # Uniform bandwidth everywhere; only switch hops grow with span.
        if span <= sys.hbd_size:
            hops = 1
        elif span <= sys.hbd_size ** 2:
            hops = 2
        else:
            hops = 3
        tier = "su" if span <= sys.hbd_size else "so"
        return TierChoice(tier, sys.su_bw, sys.su_latency, hops)
    if span <= sys.hbd_size:
        return TierChoice("su", sys.su_bw, sys.su_latency, 1)
    return TierChoice("so", sys.so_bw, sys.so_latency, 3)


def place_groups(strategy, sys: SystemSpec, total_gpus: int) -> dict:
    spans = group_spans(strategy, total_gpus)
    sizes = {"tp": strategy.tp, "es": strategy.es, "ep": strategy.ep,
             "pp": strategy.pp, "dp": strategy.dp, "dp_exp": strategy.dp_exp}
    return {dim: PlacedGroup(dim, sizes[dim], span, tier_for_span(sys, span))
            for dim, span in spans.items()}


def collective_bytes(kind: str, payload: float, group_size: int,
                     hw_collectives: bool) -> float:
    """Bytes crossing one participant's link for a collective."""
    g = group_size
    if g <= 1 or payload <= 0:
        return 0.0
    if kind == "allreduce":
        vol = 2.0 * payload * (g - 1) / g
        return vol / HW_ALLREDUCE_FACTOR if hw_collectives else vol
    if kind in ("reduce_scatter", "all_gather"):
        vol = payload * (g - 1) / g
        return vol / HW_RS_AG_FACTOR if hw_collectives else vol
    if kind == "all_to_all":
        return payload * (g - 1) / g
    if kind == "p2p":
        return payload
    raise ValueError(kind)


def collective_time(event: CommEvent, tier: TierChoice,
                    sys: SystemSpec) -> CollectiveCost:
    """Latency + bandwidth wire time, plus GPU cycles for SW collectives."""
    g = event.group_size
    if g <= 1:
        return CollectiveCost(0.0, 0.0)
    n_bytes = collective_bytes(event.kind, event.payload_bytes, g,
                               sys.hw_collectives)
    steps = 1 if event.kind == "p2p" else math.ceil(math.log2(g))
    wire = tier.hops * tier.base_latency * steps \
        + n_bytes / (tier.bw * sys.net_efficiency)
    overhead = 0.0 if sys.hw_collectives else SW_GPU_OVERHEAD * wire
    return CollectiveCost(wire, overhead)


def moe_alltoall_payload(tokens_per_gpu: float, hidden_dim: int,
                         dtype_bytes: int, top_k: int) -> float:
    """Per-direction dispatch/combine payload per GPU for one layer pass."""
    return tokens_per_gpu * hidden_dim * dtype_bytes * top_k
