"""Independent oracles the test suite checks the library against.

Nothing in here imports the code paths it validates: the pipeline simulator
schedules explicit per-stage event lists, the flop counter re-derives gemm
work from the op graph, and the frontier filter applies the textbook
dominance definition directly.
"""

from llmcd.hardware import SystemSpec
from llmcd.model import ModelSpec


def sim_1f1b(pp: int, m: int, interleave: int, tf_chunk: float,
             tb_chunk: float) -> float:
    """Makespan of an interleaved one-forward-one-backward pipeline.

    Event-driven simulation: every rank executes its fixed schedule (warmup
    forwards, steady 1F1B, cooldown backwards) in order, each op starting
    when the rank is free and its cross-rank dependency has completed.
    tf_chunk/tb_chunk are per-model-chunk stage times; a microbatch makes
    `interleave` forward and backward passes through all pp ranks.
    """
    v = interleave
    if v > 1:
        assert m % pp == 0, "interleaving requires m to be a multiple of pp"
    total = m * v

    if v == 1:
        fwd_order = [(0, i) for i in range(m)]
        bwd_order = [(0, i) for i in range(m)]
    else:
        fwd_order, bwd_order = [], []
        for g in range(m // pp):
            mbs = list(range(g * pp, (g + 1) * pp))
            for c in range(v):
                fwd_order.extend((c, i) for i in mbs)
            for c in reversed(range(v)):
                bwd_order.extend((c, i) for i in mbs)

    seqs = []
    for r in range(pp):
        if v == 1:
            w = min(m, pp - r - 1)
        else:
            w = min(total, (pp - r - 1) * 2 + (v - 1) * pp)
        seq = [("f",) + fwd_order[k] for k in range(w)]
        for k in range(total - w):
            seq.append(("f",) + fwd_order[w + k])
            seq.append(("b",) + bwd_order[k])
        for k in range(total - w, total):
            seq.append(("b",) + bwd_order[k])
        seqs.append(seq)

    def dep(kind, c, i, r):
        if kind == "f":
            if r > 0:
                return ("f", c, i, r - 1)
            if c > 0:
                return ("f", c - 1, i, pp - 1)
            return None
        if r < pp - 1:
            return ("b", c, i, r + 1)
        if c < v - 1:
            return ("b", c + 1, i, 0)
        return ("f", v - 1, i, pp - 1)

    done = {}
    ptr = [0] * pp
    rank_t = [0.0] * pp
    n_ops = 2 * total
    while any(p < n_ops for p in ptr):
        progress = False
        for r in range(pp):
            while ptr[r] < n_ops:
                kind, c, i = seqs[r][ptr[r]]
                need = dep(kind, c, i, r)
                if need is not None and need not in done:
                    break
                start = max(rank_t[r], done.get(need, 0.0))
                rank_t[r] = start + (tf_chunk if kind == "f" else tb_chunk)
                done[(kind, c, i, r)] = rank_t[r]
                ptr[r] += 1
                progress = True
        assert progress, "pipeline schedule deadlocked"
    return max(rank_t)


def gemm_flops_per_layer(model, strategy, precision: str = "fp8") -> float:
    """Matrix-multiply flops of one layer graph (selection ops excluded)."""
    from llmcd.model import build_layer_graph
    return sum(op.flops for op in build_layer_graph(model, strategy, precision)
               if op.name != "topk_select")


def pareto_front(points):
    """Minimal elements of (step_time, tier1_bytes) pairs, earliest-first
    on exact ties; points is an ordered list of (key2, row)."""
    keep = []
    for idx, (key, row) in enumerate(points):
        dominated = False
        for jdx, (other, _) in enumerate(points):
            if jdx == idx:
                continue
            if other[0] <= key[0] and other[1] <= key[1]:
                if other[0] < key[0] or other[1] < key[1] or jdx < idx:
                    dominated = True
                    break
        if not dominated:
            keep.append(row)
    return keep


def toy_model(**over) -> ModelSpec:
    base = dict(name="toy-moe", num_layers=4, hidden_dim=256, ff_dim=512,
                num_heads=8, seq_len=128, vocab_size=1024,
                num_experts=4, top_k=2)
    base.update(over)
    return ModelSpec(**base)


def toy_dense(**over) -> ModelSpec:
    over.setdefault("name", "toy-dense")
    return toy_model(num_experts=1, top_k=1, **over)


def toy_system(**over) -> SystemSpec:
    base = dict(name="toy-sys", flops_fp8=0.1e15, flops_fp16=0.05e15,
                tier1_bw=1e12, tier1_cap=64e9, tier2_bw=200e9,
                tier2_cap=256e9, hbd_size=8, su_bw=400e9, so_bw=50e9,
                su_latency=1e-6, so_latency=2e-6, tier1_latency=1e-6,
                tier2_latency=2e-6, cluster_gpus=4096, topology="two_tier")
    base.update(over)
    return SystemSpec(**base)
