"""Per-GPU memory footprint, feasibility, and offload traffic.

Training state costs 20 bytes per parameter at bf16 compute precision:
2 compute weight + 4 fp32 master + 4 fp32 gradient + 8 Adam moments +
2 scratch working copies.  ZeRO-1 shards the 12 master+moment bytes across
the data-parallel group, ZeRO-2 additionally shards the 4 gradient bytes.
FP8 halves only the compute-weight copy (19 B/param total).

Attention (plus embedding) state shards over tp*pp and ZeRO-shards over dp;
expert state shards over ep*es*pp and ZeRO-shards over dp_exp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .hardware import SystemSpec
from .model import (ModelSpec, PRECISION_BYTES, count_params,
                    stored_act_bytes_per_layer)

MASTER_BYTES = 4.0
MOMENT_BYTES = 8.0
GRAD_BYTES = 4.0
SCRATCH_BYTES = 2.0
ZERO_STAGES = ("z0", "z1", "z2")


def state_bytes_per_param(zero: str, dp: int, weight_bytes: float = 2.0) -> float:
    """Total resident training-state bytes per parameter."""
    assert zero in ZERO_STAGES, zero
    master_opt = MASTER_BYTES + MOMENT_BYTES
    grad = GRAD_BYTES
    if zero in ("z1", "z2"):
        master_opt /= dp
    if zero == "z2":
        grad /= dp
    return weight_bytes + SCRATCH_BYTES + master_opt + grad


@dataclass(frozen=True)
class MemoryFootprint:
    """Component sizes in bytes per GPU; tier totals reflect offload flags."""

    weights: float               # compute weights + scratch copies
    master_and_optimizer: float
    gradients: float
    activations: float
    framework: float
    tier1_total: float
    tier2_total: float


@dataclass(frozen=True)
class Feasibility:
    ok: bool
    reason: str
    bytes_over: float
    footprint: MemoryFootprint


def _param_locals(model: ModelSpec, st) -> tuple:
    """(attention+embedding, expert) parameters resident on one GPU."""
    pc = count_params(model)
    attn_local = (pc.attention_params + pc.embedding_params) / (st.tp * st.pp)
    exp_local = model.num_experts * pc.expert_params_per_expert \
        / (st.ep * st.es * st.pp)
    return attn_local, exp_local


def _state_buckets(model: ModelSpec, st, precision: str) -> tuple:
    """(weight_copy, scratch, master_opt, grads) bytes per GPU."""
    wdt = float(PRECISION_BYTES[precision])
    attn_local, exp_local = _param_locals(model, st)
    params = attn_local + exp_local
    weight_copy = wdt * params
    scratch = SCRATCH_BYTES * params
    zdiv_attn = st.dp if st.zero in ("z1", "z2") else 1
    zdiv_exp = st.dp_exp if st.zero in ("z1", "z2") else 1
    master_opt = (MASTER_BYTES + MOMENT_BYTES) * \
        (attn_local / zdiv_attn + exp_local / zdiv_exp)
    gdiv_attn = st.dp if st.zero == "z2" else 1
    gdiv_exp = st.dp_exp if st.zero == "z2" else 1
    grads = GRAD_BYTES * (attn_local / gdiv_attn + exp_local / gdiv_exp)
    return weight_copy, scratch, master_opt, grads


def microbatch_count(st, batch: int) -> int:
    return (batch // st.dp) // st.microbatch


def activation_bytes(model: ModelSpec, st, batch: int,
                     precision: str = "fp8") -> float:
    """Backward stash per GPU: per-layer stored bytes x local layers x the

    number of microbatches in flight (pp for 1F1B, never more than exist).
    """
    per_layer = stored_act_bytes_per_layer(model, st, precision)
    layers_local = model.num_layers / st.pp
    residency = min(st.pp, microbatch_count(st, batch))
    return per_layer * layers_local * residency


def footprint(model: ModelSpec, st, sys: SystemSpec, batch: int,
              precision: str = "fp8") -> MemoryFootprint:
    weight_copy, scratch, master_opt, grads = _state_buckets(model, st, precision)
    acts = activation_bytes(model, st, batch, precision)
    fw = sys.framework_overhead

    tier2 = 0.0
    tier1 = scratch + grads + fw  # never offloaded
    if st.offload_weights:
        tier2 += weight_copy
    else:
        tier1 += weight_copy
    if st.offload_acts:
        tier2 += acts
    else:
        tier1 += acts
    if st.offload_opt:
        tier2 += master_opt
    else:
        tier1 += master_opt
    return MemoryFootprint(weights=weight_copy + scratch,
                           master_and_optimizer=master_opt,
                           gradients=grads, activations=acts, framework=fw,
                           tier1_total=tier1, tier2_total=tier2)


def feasible(model: ModelSpec, st, sys: SystemSpec, batch: int,
             precision: str = "fp8") -> Feasibility:
    fp = footprint(model, st, sys, batch, precision)
    if fp.tier1_total > sys.tier1_cap:
        over = fp.tier1_total - sys.tier1_cap
        reason = ("tier1 over by %.2f GB: weights=%.1f opt=%.1f grads=%.1f "
                  "acts=%.1f fw=%.1f cap=%.1f GB") % (
                      over / 1e9, fp.weights / 1e9,
                      fp.master_and_optimizer / 1e9, fp.gradients / 1e9,
                      fp.activations / 1e9, fp.framework / 1e9,
                      sys.tier1_cap / 1e9)
        return Feasibility(False, reason, over, fp)
    if fp.tier2_total > sys.tier2_cap:
        over = fp.tier2_total - sys.tier2_cap
        reason = "tier2 over by %.2f GB (cap %.1f GB)" % (
            over / 1e9, sys.tier2_cap / 1e9)
        return Feasibility(False, reason, over, fp)
    return Feasibility(True, "", 0.0, fp)


def offload_traffic(model: ModelSpec, st, precision: str = "fp8") -> float:
    """Tier-2 bytes moved per layer per pass for the streamed components

    (weights and activations).  Optimizer state moves once per step and is
    priced separately by the scheduler.
    """
    layers_local = model.num_layers / st.pp
    traffic = 0.0
    if st.offload_weights:
        weight_copy, _, _, _ = _state_buckets(model, st, precision)
        traffic += weight_copy / layers_local
    if st.offload_acts:
        traffic += stored_act_bytes_per_layer(model, st, precision)
    return traffic


def optimizer_offload_bytes(model: ModelSpec, st, precision: str = "fp8") -> float:
    """Round-trip bytes for the offloaded optimizer, once per step."""
    if not st.offload_opt:
        return 0.0
    _, _, master_opt, _ = _state_buckets(model, st, precision)
    return 2.0 * master_opt


def min_gpus_for_state(model: ModelSpec, tier1_cap_bytes: float,
                       bytes_per_param: float = 20.0) -> int:
    """Fewest GPUs whose combined tier-1 memory holds the training state."""
    total = count_params(model).total_params
    return math.ceil(total * bytes_per_param / tier1_cap_bytes)
