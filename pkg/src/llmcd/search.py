"""Exhaustive, deterministic strategy enumeration and ranking.

The space is every Strategy satisfying the divisibility/product invariants:
power-of-two parallel degrees drawn from the model's own divisors, crossed
with the full flag grid (recompute x zero x tp_comm x overlaps x offloads).
Enumeration order is lexicographic in Strategy.sort_key(), evaluation is
embarrassingly parallel, and reduction is order-preserving, so results are
identical for any worker count.
"""

from __future__ import annotations

import heapq
import itertools
import multiprocessing
from collections import Counter
from dataclasses import dataclass

from . import memcap, schedule
from .errors import Infeasible, InvalidStrategy
from .hardware import SystemSpec
from .model import ModelSpec
from .schedule import Strategy

CHUNK = 2048  # strategies per worker task


def pow2_divisors(n: int, limit: int = 0) -> list:
    out, d = [], 1
    while d <= n and (limit == 0 or d <= limit):
        if n % d == 0:
            out.append(d)
        d *= 2
    return out


@dataclass(frozen=True)
class ConstraintSummary:
    """Pre-search pruning report: candidate sets implied by the invariants."""

    tp_candidates: tuple
    pp_candidates: tuple
    ep_candidates: tuple
    es_candidates: tuple
    dp_bound: int
    microbatch_bound: int

    def describe(self) -> str:
        return ("tp in %s, pp in %s, ep in %s, es in %s, dp <= %d, "
                "microbatch <= %d" % (list(self.tp_candidates),
                                      list(self.pp_candidates),
                                      list(self.ep_candidates),
                                      list(self.es_candidates),
                                      self.dp_bound, self.microbatch_bound))


def prune_hint(model: ModelSpec, sys: SystemSpec, total_gpus: int = 0,
               batch: int = 0) -> ConstraintSummary:
    tps = pow2_divisors(model.num_heads, total_gpus or 0)
    if total_gpus:
        tps = [t for t in tps if total_gpus % t == 0]
    pps = pow2_divisors(model.num_layers, total_gpus or 0)
    eps = pow2_divisors(model.num_experts)
    ess = pow2_divisors(model.ff_dim, total_gpus or 0)
    return ConstraintSummary(tuple(tps), tuple(pps), tuple(eps), tuple(ess),
                             dp_bound=min(total_gpus or batch or 1,
                                          batch or total_gpus or 1),
                             microbatch_bound=batch or 1)


@dataclass(frozen=True)
class EnumerationStats:
    """How many candidate combinations each constraint rejected."""

    rejected: tuple  # ((reason, count), ...) sorted by reason

    def as_dict(self) -> dict:
        return dict(self.rejected)


def _restrict(name, candidates, pins, rejects):
    """Intersect a candidate list with an optional pin (scalar or list)."""
    if not pins or name not in pins:
        return list(candidates)
    want = pins[name]
    if not isinstance(want, (list, tuple)):
        want = (want,)
    kept = [c for c in candidates if c in want]
    if not kept:
        rejects["pin excludes all %s" % name] += len(candidates)
    return kept


def enumerate_strategies(model: ModelSpec, sys: SystemSpec, total_gpus: int,
                         batch: int, nemo_default: bool = False,
                         no_overlap: bool = False, pins: dict = None):
    """Yield every valid Strategy in deterministic lexicographic order.

    Returns (generator, rejects Counter); the counter is filled as the
    generator is consumed.  fused_activation is fixed on (strictly dominant
    under the fusion model) and is not an enumeration axis unless pinned.
    pins restricts any Strategy field to one value or a list of values,
    shrinking the space without changing the ordering of what remains.
    """
    rejects = Counter()

    def gen():
        moe = model.num_experts > 1
        overlaps_tp = ("none",) if no_overlap else schedule.TP_OVERLAP_MODES
        overlaps_dp = (False,) if no_overlap else (False, True)
        bools = (False, True)
        flag_grid = list(itertools.product(
            _restrict("recompute", ("none", "attn_only", "full"), pins, rejects),
            _restrict("zero", memcap.ZERO_STAGES, pins, rejects),
            _restrict("tp_comm", schedule.TP_COMM_KINDS, pins, rejects),
            _restrict("tp_overlap", overlaps_tp, pins, rejects),
            _restrict("dp_overlap", overlaps_dp, pins, rejects),
            _restrict("offload_weights", bools, pins, rejects),
            _restrict("offload_acts", bools, pins, rejects),
            _restrict("offload_opt", bools, pins, rejects),
            _restrict("fused_activation", (True,), pins, rejects)))
        tps = _restrict("tp", pow2_divisors(model.num_heads, total_gpus),
                        pins, rejects)
        for tp in tps:
            if total_gpus % tp != 0:
                rejects["total mod tp"] += 1
                continue
            pps = _restrict("pp", pow2_divisors(model.num_layers,
                                                total_gpus // tp),
                            pins, rejects)
            for pp in pps:
                if total_gpus % (tp * pp) != 0:
                    rejects["total mod (tp*pp)"] += 1
                    continue
                dp = total_gpus // (tp * pp)
                if dp > batch:
                    rejects["dp > batch"] += 1
                    continue
                if batch % dp != 0:
                    rejects["batch mod dp"] += 1
                    continue
                if moe:
                    pairs = []
                    eps = _restrict("ep", pow2_divisors(model.num_experts),
                                    pins, rejects)
                    ess = _restrict("es", pow2_divisors(model.ff_dim, tp * dp),
                                    pins, rejects)
                    for ep in eps:
                        for es in ess:
                            if (tp * dp) % (ep * es) != 0:
                                rejects["ep*es does not divide tp*dp"] += 1
                                continue
                            if nemo_default and not (es == tp and
                                                     ep == model.num_experts):
                                rejects["nemo filter"] += 1
                                continue
                            pairs.append((ep, es, (tp * dp) // (ep * es)))
                elif model.ff_dim % tp != 0:
                    rejects["f mod es (dense es=tp)"] += 1
                    pairs = []
                else:
                    pairs = [(1, tp, dp)]  # dense: MLP shards with the tp group
                if not pairs:
                    continue
                mbs = _restrict("microbatch", pow2_divisors(batch // dp),
                                pins, rejects)
                if pp == 1:
                    ils = [1]
                else:
                    stage_layers = model.num_layers // pp
                    ils = sorted(set(pow2_divisors(stage_layers)) |
                                 {stage_layers})
                ils = _restrict("interleave", ils, pins, rejects)
                for (ep, es, dp_exp), mb, il in itertools.product(pairs, mbs, ils):
                    for (rec, zero, tpc, tpo, dpo, ow, oa, oo, fa) in flag_grid:
                        yield Strategy(tp=tp, pp=pp, dp=dp, ep=ep, es=es,
                                       dp_exp=dp_exp, microbatch=mb,
                                       interleave=il, recompute=rec,
                                       zero=zero, tp_comm=tpc, tp_overlap=tpo,
                                       dp_overlap=dpo, fused_activation=fa,
                                       offload_weights=ow, offload_acts=oa,
                                       offload_opt=oo)

    return gen(), rejects


@dataclass(frozen=True)
class SearchRow:
    """One evaluated strategy, flattened to the CSV metric set."""

    strategy: Strategy
    step_time: float
    compute_t: float
    exposed_comm_t: float
    bubble_t: float
    recompute_t: float
    offload_t: float
    tier1_bytes: float
    tokens_per_sec: float
    mfu: float

    def rank_key(self) -> tuple:
        return (self.step_time, self.strategy.sort_key())


@dataclass
class SearchResult:
    rows: list                # top_n feasible rows, ranked
    pareto: list              # (step_time, tier1) nondominated rows, ranked
    evaluated: int
    feasible_count: int
    infeasible_reasons: Counter
    enum_rejects: Counter
    mfu_min: float
    mfu_max: float

    @property
    def best(self):
        return self.rows[0] if self.rows else None

    def spread(self) -> float:
        """Relative step-time spread across the retained top rows."""
        if len(self.rows) < 2:
            return 0.0
        return (self.rows[-1].step_time - self.rows[0].step_time) \
            / self.rows[0].step_time

    def median_step(self) -> float:
        if not self.rows:
            return 0.0
        return self.rows[len(self.rows) // 2].step_time


_CTX = {}


def _init_worker(model, sys, batch, seq, precision):
    _CTX["args"] = (model, sys, batch, seq, precision)


def _eval_one(model, sys, batch, seq, precision, st):
    try:
        est = schedule.estimate(model, sys, st, batch, seq, precision)
    except Infeasible as exc:
        return (st, None, exc.report.reason.split(" over")[0] + " over cap")
    except InvalidStrategy as exc:  # spot-check net; enumerate never trips it
        return (st, None, "invalid: %s" % exc)
    return (st, (est.step_time, est.compute_t, est.exposed_comm_t,
                 est.bubble_t, est.recompute_t, est.offload_t,
                 est.footprint.tier1_total, est.tokens_per_sec, est.mfu), "")


def _eval_chunk(chunk):
    model, sys, batch, seq, precision = _CTX["args"]
    return [_eval_one(model, sys, batch, seq, precision, st) for st in chunk]


def _chunks(it, size):
    while True:
        block = list(itertools.islice(it, size))
        if not block:
            return
        yield block


def _pareto_insert(frontier, row):
    """Keep rows nondominated in (step_time, tier1_bytes); ties keep the

    first-seen row, which enumeration order makes the lexicographic min.
    """
    step, t1 = row.step_time, row.tier1_bytes
    for (s, t), _ in frontier:
        if s <= step and t <= t1:
            return
    frontier[:] = [((s, t), r) for (s, t), r in frontier
                   if not (step <= s and t1 <= t)]
    frontier.append(((step, t1), row))


def search(model: ModelSpec, sys: SystemSpec, total_gpus: int, batch: int,
           seq: int = 0, precision: str = "fp8", top_n: int = 5000,
           threads: int = 1, nemo_default: bool = False,
           no_overlap: bool = False, pins: dict = None,
           on_row=None) -> SearchResult:
    """Evaluate the whole space; keep the ranked top_n and the Pareto set.

    on_row, when given, sees every evaluated (strategy, metrics|None,
    reason) in deterministic enumeration order.
    """
    gen, rejects = enumerate_strategies(model, sys, total_gpus, batch,
                                        nemo_default, no_overlap, pins)
    heap = []  # max-heap by negated rank key
    seq_no = itertools.count()
    evaluated = feasible_count = 0
    reasons = Counter()
    mfu_min, mfu_max = float("inf"), float("-inf")
    frontier = []

    def consume(result):
        nonlocal evaluated, feasible_count, mfu_min, mfu_max
        st, metrics, reason = result
        evaluated += 1
        if on_row is not None:
            on_row(st, metrics, reason)
        if metrics is None:
            reasons[reason] += 1
            return
        feasible_count += 1
        row = SearchRow(st, *metrics)
        mfu_min = min(mfu_min, row.mfu)
        mfu_max = max(mfu_max, row.mfu)
        # heapq is a min-heap; store the negated key for a bounded max-heap.
        key = _neg(row.rank_key())
        if len(heap) < top_n:
            heapq.heappush(heap, (key, next(seq_no), row))
        elif key > heap[0][0]:
            heapq.heapreplace(heap, (key, next(seq_no), row))
        _pareto_insert(frontier, row)

    if threads > 1:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(threads, initializer=_init_worker,
                      initargs=(model, sys, batch, seq, precision)) as pool:
            for block in pool.imap(_eval_chunk, _chunks(gen, CHUNK)):
                for result in block:
                    consume(result)
    else:
        _init_worker(model, sys, batch, seq, precision)
        for block in _chunks(gen, CHUNK):
            for result in _eval_chunk(block):
                consume(result)

    rows = sorted((row for _, _, row in heap), key=SearchRow.rank_key)
    pareto = sorted((r for _, r in frontier), key=SearchRow.rank_key)
    return SearchResult(rows=rows, pareto=pareto, evaluated=evaluated,
                        feasible_count=feasible_count,
                        infeasible_reasons=reasons, enum_rejects=rejects,
                        mfu_min=mfu_min if feasible_count else 0.0,
                        mfu_max=mfu_max if feasible_count else 0.0)


def _neg(key: tuple) -> tuple:
    """Order-reversing transform for rank keys (numbers and strings)."""
    out = []
    for x in key:
        if isinstance(x, tuple):
            out.append(_neg(x))
        elif isinstance(x, bool):
            out.append(not x)
        else:
            out.append(-x)
    return tuple(out)
