#!/usr/bin/env python3
"""Exhaustive strategy search for a trillion-parameter model.

Enumerates every legal parallelization of gpt-1.8t over 512 GPUs of a
two-tier cluster (execution flags pinned to the common fast path: overlap
on, no recompute, no offload), ranks by step time, and prints the podium
plus the step-time/memory Pareto frontier.
"""

from llmcd.hardware import SystemSpec
from llmcd.model import ModelSpec
from llmcd.search import search


def describe(st):
    tags = ["tp=%d" % st.tp, "pp=%d" % st.pp, "dp=%d" % st.dp,
            "ep=%d" % st.ep, "es=%d" % st.es, "mb=%d" % st.microbatch,
            st.zero, st.tp_comm]
    if st.recompute != "none":
        tags.append("rec=" + st.recompute)
    if st.offload_opt:
        tags.append("off-opt")
    return " ".join(tags)


def main():
    model = ModelSpec.from_json("gpt-1.8t")
    system = SystemSpec.from_json("twotier-hbd64")
    gpus, batch = 512, 512

    result = search(model, system, gpus, batch,
                    pins={"offload_weights": False, "offload_acts": False,
                          "offload_opt": False, "recompute": "none",
                          "tp_overlap": "ring", "dp_overlap": True})
    print("searched %d strategies, %d feasible, %.1fs best step" % (
        result.evaluated, result.feasible_count, result.best.step_time))
    print()

    print("top 5 by step time:")
    for rank, row in enumerate(result.rows[:5], start=1):
        print("  %d. %7.3f s  mfu=%.3f  %s" % (
            rank, row.step_time, row.mfu, describe(row.strategy)))
    print()

    print("step-time vs tier1-memory Pareto frontier:")
    for row in result.pareto:
        print("  %7.3f s  %6.1f GB  %s" % (
            row.step_time, row.tier1_bytes / 1e9, describe(row.strategy)))
    print()

    dropped = sorted(result.infeasible_reasons.items(), key=lambda kv: -kv[1])
    print("infeasibility reasons:")
    for reason, count in dropped:
        print("  %6d  %s" % (count, reason))


if __name__ == "__main__":
    main()
