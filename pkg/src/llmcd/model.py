"""Transformer model description and per-layer work accounting.

A decoder layer is decomposed into a fixed op list (gemms, batched matmuls,
elementwise/memory ops, MoE routing markers).  Every op carries the flops,
HBM bytes and backward-stored activation bytes for one microbatch on one
rank under a given parallelism strategy, which is all downstream timing and
memory code ever needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .errors import InvalidModel, InvalidStrategy

# Activation/compute-weight bytes per element by training precision.
# FP8 keeps fp32 master weights and grads; only streams shrink to 1 byte.
PRECISION_BYTES = {"fp8": 1, "fp16": 2}

RECOMPUTE_MODES = ("none", "attn_only", "full")

# Ops re-executed by attn_only recompute (the quadratic attention core).
ATTENTION_CORE_OPS = ("score_bmm", "softmax", "context_bmm")

# Op names that must never appear for a dense (E=1) model.
MOE_ONLY_OPS = ("router", "topk_select", "moe_dispatch", "moe_combine")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture of a dense or mixture-of-experts decoder transformer."""

    name: str
    num_layers: int
    hidden_dim: int
    ff_dim: int
    num_heads: int
    seq_len: int
    vocab_size: int = 51200
    num_experts: int = 1
    top_k: int = 1
    gated_mlp: bool = False
    head_dim: int = 0  # 0 = default to hidden_dim // num_heads

    def __post_init__(self):
        if min(self.num_layers, self.hidden_dim, self.ff_dim, self.num_heads,
               self.seq_len) < 1:
            raise InvalidModel("%s: dimensions must be positive" % self.name)
        if self.vocab_size < 0:
            raise InvalidModel("%s: vocab_size must be >= 0" % self.name)
        if self.head_dim == 0:
            if self.hidden_dim % self.num_heads != 0:
                raise InvalidModel("%s: h mod H != 0 with defaulted head_dim"
                                   % self.name)
            object.__setattr__(self, "head_dim",
                               self.hidden_dim // self.num_heads)
        if self.num_experts < 1:
            raise InvalidModel("%s: num_experts must be >= 1" % self.name)
        if not 1 <= self.top_k <= self.num_experts:
            raise InvalidModel("%s: top_k must be in [1, num_experts]"
                               % self.name)
        if self.num_experts == 1 and self.top_k != 1:
            raise InvalidModel("%s: dense model requires top_k == 1"
                               % self.name)

    @property
    def attn_dim(self) -> int:
        """Total attention inner width H*d (equals h when head_dim defaults)."""
        return self.num_heads * self.head_dim

    @property
    def mlp_params_per_layer(self) -> int:
        """Weight count of one expert MLP in one layer (2 or 3 matrices)."""
        mats = 3 if self.gated_mlp else 2
        return mats * self.hidden_dim * self.ff_dim

    @staticmethod
    def from_json(path_or_name: str) -> "ModelSpec":
        return ModelSpec(**_load_fixture("models", path_or_name))


@dataclass(frozen=True)
class ParamCounts:
    attention_params: int       # all layers: QKV/out projections + norms ~ 4*h*(H*d)
    expert_params_per_expert: int  # all layers, one expert's MLP matrices
    embedding_params: int       # input + output embeddings, untied
    total_params: int


@dataclass(frozen=True)
class FlopsPerToken:
    fwd: float
    train: float  # 3x fwd: backward costs twice the forward


@dataclass(frozen=True)
class OpProfile:
    """Cost profile of one op, per microbatch per rank."""

    name: str
    flops: float
    weight_bytes: float
    act_in_bytes: float
    act_out_bytes: float
    stored_act_bytes: float
    min_gemm_dim: int = 1

    def __post_init__(self):
        for f in (self.flops, self.weight_bytes, self.act_in_bytes,
                  self.act_out_bytes, self.stored_act_bytes):
            assert f >= 0, "%s: negative cost field" % self.name

    @property
    def moved_bytes(self) -> float:
        return self.weight_bytes + self.act_in_bytes + self.act_out_bytes


def count_params(model: ModelSpec) -> ParamCounts:
    """Closed-form parameter counts; see tests for the per-gemm oracle."""
    attn = model.num_layers * 4 * model.hidden_dim * model.attn_dim
    expert = model.num_layers * model.mlp_params_per_layer
    emb = 2 * model.vocab_size * model.hidden_dim
    total = attn + model.num_experts * expert + emb
    return ParamCounts(attn, expert, emb, total)


def flops_per_token(model: ModelSpec) -> FlopsPerToken:
    """Forward/train flops per token: 2 flops per active weight per token,

    plus the 4*s*(H*d) quadratic attention term per layer and the router
    gemm for MoE.  Top-k selection and elementwise ops are excluded (not
    gemms).  Recompute never changes these numbers.
    """
    m = model
    active_layer = 4 * m.hidden_dim * m.attn_dim \
        + m.top_k * m.mlp_params_per_layer
    if m.num_experts > 1:
        active_layer += m.hidden_dim * m.num_experts  # router gemm
    fwd = 2.0 * (m.num_layers * active_layer + m.vocab_size * m.hidden_dim) \
        + 4.0 * m.seq_len * m.attn_dim * m.num_layers
    return FlopsPerToken(fwd=fwd, train=3.0 * fwd)


def build_layer_graph(model, strategy, precision: str = "fp8"):
    """Op list for one decoder layer, one microbatch, one rank.

    The expert block covers the dense MLP as the E=1, es=1 special case, so
    dense and MoE share one code path; routing/dispatch ops only exist for
    E > 1.  Stored-activation bytes honor strategy.recompute and
    strategy.fused_activation (fusion keeps scores and pre-activations out
    of HBM and out of the backward stash).
    """
    m = model
    st = strategy
    dt = PRECISION_BYTES[precision]
    moe = m.num_experts > 1

    if m.num_heads % st.tp != 0:
        raise InvalidStrategy("H mod tp != 0 (H=%d, tp=%d)" % (m.num_heads, st.tp))
    if m.ff_dim % st.es != 0:
        raise InvalidStrategy("f mod es != 0 (f=%d, es=%d)" % (m.ff_dim, st.es))
    if m.num_experts % st.ep != 0:
        raise InvalidStrategy("E mod ep != 0 (E=%d, ep=%d)" % (m.num_experts, st.ep))

    mode = st.recompute
    assert mode in RECOMPUTE_MODES, mode
    fused = st.fused_activation

    t = st.microbatch * m.seq_len     # microbatch tokens per DP replica
    t_sp = t / st.tp                  # sequence-parallel tokens per rank
    h = m.hidden_dim
    a = m.attn_dim                    # H*d attention width
    a_tp = a / st.tp
    s2 = st.microbatch * (m.num_heads / st.tp) * m.seq_len ** 2  # score elems
    # Tokens seen by one rank's expert shard: the tp->es view change
    # replicates dispatched rows es-fold, scaled by top-k fan-out.
    rows = t * m.top_k * st.es / st.tp
    fe = m.ff_dim / st.es

    def stored(none_b, attn_only_b, full_b=0.0):
        return {"none": none_b, "attn_only": attn_only_b, "full": full_b}[mode]

    ops = []

    def op(name, flops=0.0, w=0.0, ain=0.0, aout=0.0, st_b=0.0, dim=1):
        ops.append(OpProfile(name, flops, w, ain, aout, st_b, dim))

    # --- attention block ---
    op("attn_norm", ain=t_sp * h * dt, aout=t_sp * h * dt,
       st_b=stored(t_sp * h * dt, t_sp * h * dt, t_sp * h * dt))
    op("qkv_proj", flops=2.0 * t * h * (3 * a / st.tp),
       w=3 * h * a / st.tp * dt, ain=t * h * dt, aout=t * 3 * a_tp * dt,
       st_b=stored(t_sp * h * dt, t_sp * h * dt),
       dim=int(min(t, h, 3 * a / st.tp)))
    score_store = 0.0 if fused else s2 * dt
    op("score_bmm", flops=2.0 * t * m.seq_len * a / st.tp,
       ain=2 * t * a_tp * dt, aout=0.0 if fused else s2 * dt,
       st_b=stored(2 * t * a_tp * dt, 2 * t * a_tp * dt),
       dim=int(min(m.head_dim, m.seq_len)))
    op("softmax", ain=0.0 if fused else s2 * dt,
       aout=0.0 if fused else s2 * dt,
       st_b=stored(score_store, 0.0))
    op("context_bmm", flops=2.0 * t * m.seq_len * a / st.tp,
       ain=(0.0 if fused else s2 * dt) + t * a_tp * dt, aout=t * a_tp * dt,
       st_b=stored(score_store + t * a_tp * dt, t * a_tp * dt),
       dim=int(min(m.head_dim, m.seq_len)))
    op("out_proj", flops=2.0 * t * a_tp * h,
       w=h * a / st.tp * dt, ain=t * a_tp * dt, aout=t * h * dt,
       st_b=stored(t * a_tp * dt, 0.0),
       dim=int(min(t, a / st.tp, h)))
    op("attn_add_norm", ain=2 * t_sp * h * dt, aout=t_sp * h * dt,
       st_b=stored(t_sp * h * dt, t_sp * h * dt))

    # --- expert / MLP block ---
    if moe:
        op("router", flops=2.0 * t_sp * h * m.num_experts,
           w=h * m.num_experts * dt, ain=t_sp * h * dt,
           aout=t_sp * m.num_experts * dt,
           st_b=stored(t_sp * h * dt, t_sp * h * dt),
           dim=int(min(t_sp, h, m.num_experts)))
        op("topk_select", flops=t_sp * m.num_experts,
           ain=t_sp * m.num_experts * dt, aout=t_sp * m.top_k * 4)
        op("moe_dispatch")  # wire cost priced by the scheduler

    w_exp = (m.num_experts / st.ep) * h * fe * dt
    prefix = "expert" if moe else "mlp"
    # Dispatched rows are stored once per es group (sequence-parallel style),
    # not replicated per rank.
    op(prefix + "_ffup", flops=2.0 * rows * h * fe, w=w_exp,
       ain=rows * h * dt, aout=rows * fe * dt,
       st_b=stored(rows * h / st.es * dt, rows * h / st.es * dt),
       dim=int(min(rows, h, fe)))
    if m.gated_mlp:
        op(prefix + "_ffgate", flops=2.0 * rows * h * fe, w=w_exp,
           ain=rows * h * dt, aout=rows * fe * dt,
           dim=int(min(rows, h, fe)))
    preact = rows * fe * dt * (2 if m.gated_mlp else 1)
    op(prefix + "_act",
       ain=0.0 if fused else preact, aout=0.0 if fused else rows * fe * dt,
       st_b=stored(0.0 if fused else preact, 0.0 if fused else preact))
    op(prefix + "_ffdown", flops=2.0 * rows * fe * h, w=w_exp,
       ain=rows * fe * dt, aout=rows * h * dt,
       st_b=stored(rows * fe * dt, rows * fe * dt),
       dim=int(min(rows, fe, h)))
    if moe:
        # Weighted combine of the top-k expert outputs back to sp shards.
        op("moe_combine", ain=(t * m.top_k / st.tp) * h * dt,
           aout=t_sp * h * dt,
           st_b=stored((t * m.top_k / st.tp) * h * dt,
                       (t * m.top_k / st.tp) * h * dt))
    op("mlp_add_norm", ain=2 * t_sp * h * dt, aout=t_sp * h * dt,
       st_b=stored(t_sp * h * dt, t_sp * h * dt))

    return ops


def stored_act_bytes_per_layer(model, strategy, precision: str = "fp8") -> float:
    """Backward-stash bytes for one layer of one microbatch on one rank."""
    return sum(o.stored_act_bytes
               for o in build_layer_graph(model, strategy, precision))


def _load_fixture(kind: str, path_or_name: str) -> dict:
    """Load a JSON spec from an explicit path or a shipped fixture name."""
    name = path_or_name
    if name.endswith(".json") or "/" in name:
        try:
            with open(name) as f:
                return json.load(f)
        except FileNotFoundError:
            name = name.rsplit("/", 1)[-1].removesuffix(".json")
    ref = resources.files("llmcd") / "fixtures" / kind / (name + ".json")
    with ref.open() as f:
        return json.load(f)


def shipped_fixture_names(kind: str):
    base = resources.files("llmcd") / "fixtures" / kind
    return sorted(p.name.removesuffix(".json")
                  for p in base.iterdir() if p.name.endswith(".json"))
