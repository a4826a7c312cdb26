#!/usr/bin/env python3
"""Price one training strategy and show where the step time goes.

Runs the analytical model for GPT-1.8T on the two-tier HBD-64 machine at
4096 GPUs with a tuned strategy, then prints the additive step breakdown
and the per-parallelism-lane communication ledger.
"""

from llmcd.hardware import SystemSpec
from llmcd.model import ModelSpec
from llmcd.schedule import Strategy, estimate_detail


def main():
    model = ModelSpec.from_json("gpt-1.8t")
    system = SystemSpec.from_json("twotier-hbd64")
    strategy = Strategy(tp=4, pp=1, dp=1024, ep=16, es=4, dp_exp=64,
                        microbatch=1, interleave=1, recompute="none",
                        zero="z2", tp_comm="allreduce", tp_overlap="ring",
                        dp_overlap=True, fused_activation=True)
    batch = 1024

    est, detail = estimate_detail(model, system, strategy, batch)

    print("%s on %s, %d GPUs, global batch %d" % (
        model.name, system.name, strategy.tp * strategy.pp * strategy.dp,
        batch))
    print()
    buckets = (("compute", est.compute_t),
               ("exposed comm", est.exposed_comm_t),
               ("pipeline bubble", est.bubble_t),
               ("recompute", est.recompute_t),
               ("offload stall", est.offload_t))
    for name, t in buckets:
        print("  %-16s %8.3f s  (%5.1f%%)" % (
            name, t, 100.0 * t / est.step_time))
    print("  %-16s %8.3f s" % ("step", est.step_time))
    print()
    print("  tokens/s %.3e   MFU %.3f   tier1 %.1f GB/GPU" % (
        est.tokens_per_sec, est.mfu, est.footprint.tier1_total / 1e9))
    print()
    print("  lane     tier  events      wire      exposed")
    for lane in detail.lanes:
        if lane.events == 0:
            continue
        print("  %-7s  %-4s  %6d  %8.3f s  %8.3f s" % (
            lane.dim, lane.tier, lane.events, lane.wire_t, lane.exposed_t))


if __name__ == "__main__":
    main()
