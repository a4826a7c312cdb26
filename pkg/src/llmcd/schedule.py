"""Strategy definition and end-to-end step-time estimation.

A training step is decomposed into five additive buckets: forward+backward
compute, exposed (un-overlapped) communication, pipeline bubble, activation
recompute, and exposed tier-2 offload traffic.  tokens/s and MFU derive
from the step time; MFU's numerator counts model flops only, never
recompute, so it is invariant to the recompute mode.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

from . import memcap
from .errors import Infeasible, InvalidStrategy
from .hardware import SystemSpec, op_time, tier2_transfer_time
from .model import (ATTENTION_CORE_OPS, ModelSpec, PRECISION_BYTES,
                    RECOMPUTE_MODES, build_layer_graph, flops_per_token)
from .topology import CommEvent, collective_time, place_groups

TP_COMM_KINDS = ("allreduce", "rs_ag", "p2p_rs_ag")
TP_OVERLAP_MODES = ("none", "ring")


@dataclass(frozen=True)
class Strategy:
    """One point in the parallelization/execution design space."""

    tp: int = 1
    pp: int = 1
    dp: int = 1
    ep: int = 1
    es: int = 1
    dp_exp: int = 0          # 0 = derive (tp*dp/(ep*es) for MoE, dp for dense)
    microbatch: int = 1
    interleave: int = 1
    recompute: str = "none"
    zero: str = "z0"
    tp_comm: str = "allreduce"
    tp_overlap: str = "none"
    dp_overlap: bool = False
    fused_activation: bool = False
    offload_weights: bool = False
    offload_acts: bool = False
    offload_opt: bool = False

    @property
    def total_gpus(self) -> int:
        return self.tp * self.pp * self.dp

    def sort_key(self) -> tuple:
        """Total deterministic order; ranking ties break on this."""
        return (self.tp, self.pp, self.dp, self.ep, self.es, self.dp_exp,
                self.microbatch, self.interleave,
                RECOMPUTE_MODES.index(self.recompute),
                memcap.ZERO_STAGES.index(self.zero),
                TP_COMM_KINDS.index(self.tp_comm),
                TP_OVERLAP_MODES.index(self.tp_overlap),
                self.dp_overlap, self.fused_activation,
                self.offload_weights, self.offload_acts, self.offload_opt)


def normalize(model: ModelSpec, st: Strategy) -> Strategy:
    """Resolve derived fields: for a dense model the single "expert" is the
    MLP itself, sharded across the tensor-parallel group (ep=1, es=tp,
    dp_exp=dp), so dense and MoE share one code path with standard dense TP
    semantics.  A zero dp_exp is derived from the product invariant
    ep*es*dp_exp = tp*dp.
    """
    if model.num_experts == 1:
        return replace(st, ep=1, es=st.tp, dp_exp=st.dp)
    if st.dp_exp == 0:
        prod = st.tp * st.dp
        if prod % (st.ep * st.es) != 0:
            raise InvalidStrategy("ep*es does not divide tp*dp "
                                  "(%d*%d vs %d*%d)" % (st.ep, st.es, st.tp, st.dp))
        return replace(st, dp_exp=prod // (st.ep * st.es))
    return st


def validate_strategy(model: ModelSpec, st: Strategy, batch: int) -> None:
    """Raise InvalidStrategy naming the violated constraint."""
    for name in ("tp", "pp", "dp", "ep", "es", "dp_exp", "microbatch",
                 "interleave"):
        if getattr(st, name) < 1:
            raise InvalidStrategy("%s must be >= 1" % name)
    if st.recompute not in RECOMPUTE_MODES:
        raise InvalidStrategy("unknown recompute mode %r" % st.recompute)
    if st.zero not in memcap.ZERO_STAGES:
        raise InvalidStrategy("unknown zero stage %r" % st.zero)
    if st.tp_comm not in TP_COMM_KINDS:
        raise InvalidStrategy("unknown tp_comm kind %r" % st.tp_comm)
    if st.tp_overlap not in TP_OVERLAP_MODES:
        raise InvalidStrategy("unknown tp_overlap mode %r" % st.tp_overlap)
    if model.num_heads % st.tp != 0:
        raise InvalidStrategy("H mod tp != 0 (H=%d, tp=%d)"
                              % (model.num_heads, st.tp))
    if model.num_layers % (st.pp * st.interleave) != 0:
        raise InvalidStrategy("L mod (pp*interleave) != 0 (L=%d, pp=%d, il=%d)"
                              % (model.num_layers, st.pp, st.interleave))
    if st.pp == 1 and st.interleave != 1:
        raise InvalidStrategy("interleave > 1 requires pp > 1")
    if model.ff_dim % st.es != 0:
        raise InvalidStrategy("f mod es != 0 (f=%d, es=%d)"
                              % (model.ff_dim, st.es))
    if model.num_experts % st.ep != 0:
        raise InvalidStrategy("E mod ep != 0 (E=%d, ep=%d)"
                              % (model.num_experts, st.ep))
    if model.num_experts == 1:
        if st.ep != 1 or st.es != st.tp or st.dp_exp != st.dp:
            raise InvalidStrategy("dense model requires ep=1, es=tp, dp_exp=dp")
    elif st.ep * st.es * st.dp_exp != st.tp * st.dp:
        raise InvalidStrategy("ep*es*dp_exp != tp*dp (%d*%d*%d vs %d*%d)" % (
            st.ep, st.es, st.dp_exp, st.tp, st.dp))
    if st.dp > batch:
        raise InvalidStrategy("dp > batch (%d > %d)" % (st.dp, batch))
    if batch % st.dp != 0:
        raise InvalidStrategy("batch mod dp != 0 (batch=%d, dp=%d)"
                              % (batch, st.dp))
    if (batch // st.dp) % st.microbatch != 0:
        raise InvalidStrategy("(batch/dp) mod microbatch != 0 "
                              "(%d mod %d)" % (batch // st.dp, st.microbatch))


def overlap(comm_t: float, compute_t: float, mode) -> float:
    """Exposed time of a communication window against a compute budget."""
    if mode in ("ring", True):
        return max(0.0, comm_t - compute_t)
    return comm_t


def pipeline_bubble(pp: int, microbatches: int, interleave: int,
                    chunk_fwd: float, chunk_bwd: float) -> float:
    """1F1B fill/drain idle time per step; chunk args are per-stage

    per-microbatch wall times.  Interleaving divides the bubble.
    """
    assert microbatches >= 1
    if pp == 1:
        return 0.0
    return (pp - 1) * (chunk_fwd + chunk_bwd) / interleave


def recompute_time(fwd_t: float, mode: str, attn_core_t: float = 0.0) -> float:
    """Per-layer re-executed forward time for a recompute mode."""
    if mode == "full":
        return fwd_t
    if mode == "attn_only":
        return attn_core_t
    return 0.0


@dataclass(frozen=True)
class _LayerCosts:
    """Graph-derived per-layer quantities shared by many strategies."""

    t_fwd: float
    t_bwd: float
    t_attn_core: float
    stored_bytes: float
    tp_payload: float
    es_payload: float
    a2a_payload: float
    p2p_payload: float


@lru_cache(maxsize=65536)
def _layer_costs(model: ModelSpec, sys: SystemSpec, precision: str,
                 tp: int, ep: int, es: int, microbatch: int,
                 recompute: str, fused: bool) -> _LayerCosts:
    probe = Strategy(tp=tp, ep=ep, es=es, microbatch=microbatch,
                     recompute=recompute, fused_activation=fused)
    graph = build_layer_graph(model, probe, precision)
    t_fwd = sum(op_time(op, sys, precision) for op in graph)
    t_attn = sum(op_time(op, sys, precision) for op in graph
                 if op.name in ATTENTION_CORE_OPS)
    stored = sum(op.stored_act_bytes for op in graph)
    dt = PRECISION_BYTES[precision]
    t_tokens = microbatch * model.seq_len
    rows = t_tokens * model.top_k * es / tp
    return _LayerCosts(
        t_fwd=t_fwd, t_bwd=2.0 * t_fwd, t_attn_core=t_attn,
        stored_bytes=stored,
        tp_payload=t_tokens * model.hidden_dim * dt,
        es_payload=rows * model.hidden_dim * dt,
        a2a_payload=(t_tokens / tp) * model.hidden_dim * dt * model.top_k,
        p2p_payload=t_tokens * model.hidden_dim * dt / tp)


def _sync_events(kind: str, payload: float, group: int) -> list:
    """Events for one tensor-sync point under a tp_comm kind."""
    if kind == "allreduce":
        return [CommEvent("allreduce", payload, group)]
    return [CommEvent("reduce_scatter", payload, group),
            CommEvent("all_gather", payload, group)]


def _price(events, tier, sys):
    wire = ovh = 0.0
    for ev in events:
        cost = collective_time(ev, tier, sys)
        wire += cost.wire_t
        ovh += cost.gpu_overhead_t
    return wire, ovh


@dataclass(frozen=True)
class CommLane:
    """Per-step communication summary for one parallel dimension."""

    dim: str
    tier: str
    events: int
    wire_t: float
    overhead_t: float
    exposed_t: float


@dataclass(frozen=True)
class StepDetail:
    """Step internals for analysis: per-dim comm lanes and chunk walls."""

    lanes: tuple
    t_fwd_layer: float
    t_bwd_layer: float
    t_recompute_layer: float
    fwd_wall: float
    bwd_wall: float
    microbatches: int

    def lane(self, dim: str) -> CommLane:
        return next(l for l in self.lanes if l.dim == dim)

    @property
    def scale_out_exposed_t(self) -> float:
        return sum(l.exposed_t for l in self.lanes if l.tier == "so")


@dataclass(frozen=True)
class _LayerComm:
    """Per-layer comm of one fwd+bwd pass pair, with per-dim attribution."""

    exposed_fwd: float
    exposed_bwd: float
    # dim -> (tier, events_per_pass_pair, wire, overhead, exposed)
    parts: dict


def _layer_comm(model, sys, st, costs, placement) -> _LayerComm:
    # One sync point per pass around attention (tp group) and one around the
    # expert/MLP block (es group; equals the tp group for a dense model).
    tp_events = _sync_events(st.tp_comm, costs.tp_payload, st.tp)
    tp_wire, tp_ovh = _price(tp_events, placement["tp"].tier, sys)
    es_events, a2a_events = [], []
    if st.es > 1:
        es_events = _sync_events(st.tp_comm, costs.es_payload, st.es)
    if model.num_experts > 1 and st.ep > 1:
        a2a_events = [CommEvent("all_to_all", costs.a2a_payload, st.ep)] * 2
    es_wire, es_ovh = _price(es_events, placement["es"].tier, sys)
    a2a_wire, a2a_ovh = _price(a2a_events, placement["ep"].tier, sys)

    pool = tp_wire + es_wire  # overlappable against the layer's own compute
    pool_exposed_f = overlap(pool, costs.t_fwd, st.tp_overlap)
    pool_exposed_b = overlap(pool, costs.t_bwd, st.tp_overlap)
    exposed_f = pool_exposed_f + a2a_wire + tp_ovh + es_ovh + a2a_ovh
    exposed_b = pool_exposed_b + a2a_wire + tp_ovh + es_ovh + a2a_ovh

    pool_exposed = pool_exposed_f + pool_exposed_b
    tp_share = tp_wire / pool if pool > 0 else 0.0
    es_share = es_wire / pool if pool > 0 else 0.0
    parts = {
        "tp": (placement["tp"].tier.tier, 2 * len(tp_events),
               2 * tp_wire, 2 * tp_ovh,
               pool_exposed * tp_share + 2 * tp_ovh),
        "es": (placement["es"].tier.tier, 2 * len(es_events),
               2 * es_wire, 2 * es_ovh,
               pool_exposed * es_share + 2 * es_ovh),
        "ep": (placement["ep"].tier.tier, 2 * len(a2a_events),
               2 * a2a_wire, 2 * a2a_ovh,
               2 * (a2a_wire + a2a_ovh)),
    }
    return _LayerComm(exposed_f, exposed_b, parts)


def microbatch_time(model: ModelSpec, sys: SystemSpec, st: Strategy,
                    precision: str = "fp8"):
    """Per-stage wall times of one microbatch and its comm events.

    Returns (fwd_s, bwd_s, tp_events, moe_events); event lists cover one
    forward pass through one stage (backward repeats them).  The expert
    all-reduce rides in tp_events since it follows tp_comm/tp_overlap.
    """
    st = normalize(model, st)
    costs = _layer_costs(model, sys, precision, st.tp, st.ep, st.es,
                         st.microbatch, st.recompute, st.fused_activation)
    layers_local = int(model.num_layers // st.pp)
    tp_events, moe_events = [], []
    for _ in range(layers_local):
        if st.tp > 1:
            tp_events.extend(_sync_events(st.tp_comm, costs.tp_payload, st.tp))
        if st.es > 1:
            tp_events.extend(_sync_events(st.tp_comm, costs.es_payload, st.es))
        if model.num_experts > 1 and st.ep > 1:
            moe_events.append(CommEvent("all_to_all", costs.a2a_payload, st.ep))
            moe_events.append(CommEvent("all_to_all", costs.a2a_payload, st.ep))
    placement = place_groups(st, sys, st.total_gpus)
    comm = _layer_comm(model, sys, st, costs, placement)
    fwd_s = layers_local * (costs.t_fwd + comm.exposed_fwd)
    bwd_s = layers_local * (costs.t_bwd + comm.exposed_bwd)
    return fwd_s, bwd_s, tp_events, moe_events


@dataclass(frozen=True)
class RunEstimate:
    strategy: Strategy
    total_gpus: int
    precision: str
    step_time: float
    compute_t: float
    exposed_comm_t: float
    bubble_t: float
    recompute_t: float
    offload_t: float
    footprint: memcap.MemoryFootprint
    tokens_per_sec: float
    mfu: float

    def to_json_dict(self) -> dict:
        st = self.strategy
        return {
            "strategy": {
                "tp": st.tp, "pp": st.pp, "dp": st.dp, "ep": st.ep,
                "es": st.es, "dp_exp": st.dp_exp,
                "microbatch": st.microbatch, "interleave": st.interleave,
                "recompute": st.recompute, "zero": st.zero,
                "tp_comm": st.tp_comm, "tp_overlap": st.tp_overlap,
                "dp_overlap": st.dp_overlap,
                "fused_activation": st.fused_activation,
                "offload_weights": st.offload_weights,
                "offload_acts": st.offload_acts,
                "offload_opt": st.offload_opt,
            },
            "total_gpus": self.total_gpus,
            "precision": self.precision,
            "step_time_s": self.step_time,
            "compute_s": self.compute_t,
            "exposed_comm_s": self.exposed_comm_t,
            "bubble_s": self.bubble_t,
            "recompute_s": self.recompute_t,
            "offload_s": self.offload_t,
            "footprint_bytes": {
                "weights": self.footprint.weights,
                "master_and_optimizer": self.footprint.master_and_optimizer,
                "gradients": self.footprint.gradients,
                "activations": self.footprint.activations,
                "framework": self.footprint.framework,
                "tier1_total": self.footprint.tier1_total,
                "tier2_total": self.footprint.tier2_total,
            },
            "tokens_per_sec": self.tokens_per_sec,
            "mfu": self.mfu,
        }


def estimate(model: ModelSpec, sys: SystemSpec, strategy: Strategy,
             batch: int, seq: int = 0, precision: str = "fp8") -> RunEstimate:
    est, _ = estimate_detail(model, sys, strategy, batch, seq, precision)
    return est


def estimate_detail(model: ModelSpec, sys: SystemSpec, strategy: Strategy,
                    batch: int, seq: int = 0, precision: str = "fp8"):
    """Full step estimate plus the StepDetail breakdown.

    Raises InvalidStrategy for contract violations and Infeasible (carrying
    the memcap report) when the strategy does not fit the machine.
    """
    if seq and seq != model.seq_len:
        model = replace(model, seq_len=seq)
    st = normalize(model, strategy)
    validate_strategy(model, st, batch)

    feas = memcap.feasible(model, st, sys, batch, precision)
    if not feas.ok:
        raise Infeasible(feas)

    costs = _layer_costs(model, sys, precision, st.tp, st.ep, st.es,
                         st.microbatch, st.recompute, st.fused_activation)
    placement = place_groups(st, sys, st.total_gpus)
    layers_local = model.num_layers / st.pp
    m = memcap.microbatch_count(st, batch)

    comm = _layer_comm(model, sys, st, costs, placement)
    t_rec = recompute_time(costs.t_fwd, st.recompute, costs.t_attn_core)

    # Pipeline point-to-point: one boundary send per chunk per direction.
    p2p_wire = p2p_ovh = 0.0
    if st.pp > 1:
        cost = collective_time(CommEvent("p2p", costs.p2p_payload, 2),
                               placement["pp"].tier, sys)
        p2p_wire, p2p_ovh = cost.wire_t, cost.gpu_overhead_t
    p2p_step = 2 * m * st.interleave * (p2p_wire + p2p_ovh)

    # Data-parallel gradient sync, once per step, against the whole backward.
    attn_local, exp_local = memcap._param_locals(model, st)
    wdt = PRECISION_BYTES[precision]
    dp_lanes = {}
    dp_wire_total = dp_ovh_total = 0.0
    for params, dim in ((attn_local, "dp"), (exp_local, "dp_exp")):
        group = getattr(st, dim)
        if st.zero == "z0":
            evs = [CommEvent("allreduce", memcap.GRAD_BYTES * params, group)]
        else:
            evs = [CommEvent("reduce_scatter", memcap.GRAD_BYTES * params, group),
                   CommEvent("all_gather", wdt * params, group)]
        wire, ovh = _price(evs, placement[dim].tier, sys)
        dp_lanes[dim] = (placement[dim].tier.tier,
                         len(evs) if group > 1 else 0, wire, ovh)
        dp_wire_total += wire
        dp_ovh_total += ovh
    bwd_total = m * layers_local * costs.t_bwd
    dp_exposed = overlap(dp_wire_total, bwd_total, st.dp_overlap) + dp_ovh_total

    # Tier-2 offload streams overlap each pass's compute; the optimizer
    # round-trip at the step boundary has nothing to hide behind.
    traffic = memcap.offload_traffic(model, st, precision)
    off_fwd = off_bwd = 0.0
    if traffic > 0:
        t_off = tier2_transfer_time(sys, traffic)
        off_fwd = max(0.0, t_off - costs.t_fwd)
        off_bwd = max(0.0, t_off - costs.t_bwd)
    offload_t = m * layers_local * (off_fwd + off_bwd) \
        + tier2_transfer_time(sys, memcap.optimizer_offload_bytes(model, st,
                                                                  precision))

    compute_t = m * layers_local * (costs.t_fwd + costs.t_bwd)
    exposed_comm_t = m * layers_local * (comm.exposed_fwd + comm.exposed_bwd) \
        + p2p_step + dp_exposed
    recompute_t = m * layers_local * t_rec

    fwd_wall = layers_local * (costs.t_fwd + comm.exposed_fwd) \
        + st.interleave * p2p_wire
    bwd_wall = layers_local * (costs.t_bwd + comm.exposed_bwd + t_rec) \
        + st.interleave * p2p_wire
    bubble_t = pipeline_bubble(st.pp, m, st.interleave, fwd_wall, bwd_wall)

    step = compute_t + exposed_comm_t + bubble_t + recompute_t + offload_t
    tokens_per_sec = batch * model.seq_len / step
    fpt = flops_per_token(model)
    mfu = fpt.train * tokens_per_sec / (st.total_gpus *
                                        sys.peak_flops(precision))

    scale = m * layers_local  # pass pairs per step
    lanes = [CommLane(dim, tier, int(events * scale), wire * scale,
                      ovh * scale, exposed * scale)
             for dim, (tier, events, wire, ovh, exposed) in comm.parts.items()]
    lanes.append(CommLane("pp", placement["pp"].tier.tier,
                          2 * m * st.interleave if st.pp > 1 else 0,
                          p2p_step, 0.0, p2p_step))
    dp_pool = dp_wire_total
    for dim, (tier, events, wire, ovh) in dp_lanes.items():
        share = wire / dp_pool if dp_pool > 0 else 0.0
        lanes.append(CommLane(dim, tier, events, wire, ovh,
                              (dp_exposed - dp_ovh_total) * share + ovh))

    detail = StepDetail(lanes=tuple(lanes), t_fwd_layer=costs.t_fwd,
                        t_bwd_layer=costs.t_bwd, t_recompute_layer=t_rec,
                        fwd_wall=fwd_wall, bwd_wall=bwd_wall, microbatches=m)
    est = RunEstimate(strategy=st, total_gpus=st.total_gpus,
                      precision=precision, step_time=step,
                      compute_t=compute_t, exposed_comm_t=exposed_comm_t,
                      bubble_t=bubble_t, recompute_t=recompute_t,
                      offload_t=offload_t, footprint=feas.footprint,
                      tokens_per_sec=tokens_per_sec, mfu=mfu)
    return est, detail
