#!/usr/bin/env python3
"""Training-state memory arithmetic: how many GPUs just to hold a model?

Walks the parameter counts for the shipped model fixtures, converts them to
optimizer-state bytes at 20 B/param (fp16 weights + fp32 master + Adam
moments + gradients + scratch), and prints the minimum GPU count whose
combined tier-1 memory holds the state.  Then shows how ZeRO sharding and
tier-2 offload change one GPU's footprint for GPT-1.8T.
"""

from dataclasses import replace

from llmcd.hardware import SystemSpec
from llmcd.memcap import footprint, min_gpus_for_state
from llmcd.model import ModelSpec, count_params
from llmcd.schedule import Strategy, normalize


def main():
    print("minimum GPUs to hold the training state (80 GB tier-1 nodes)")
    for name in ("gpt3-175b", "gpt-1.8t", "gpt-29t"):
        model = ModelSpec.from_json(name)
        counts = count_params(model)
        floor = min_gpus_for_state(model, 80e9)
        print("  %-10s  %8.1fB params  ->  %6d GPUs" % (
            name, counts.total_params / 1e9, floor))

    print()
    print("one GPU's footprint for gpt-1.8t at 512 GPUs (batch 512)")
    model = ModelSpec.from_json("gpt-1.8t")
    system = SystemSpec.from_json("twotier-hbd64")
    base = Strategy(tp=8, pp=1, dp=64, ep=16, es=8, dp_exp=4,
                    microbatch=1, recompute="none", zero="z0",
                    fused_activation=True)
    variants = (("zero=z0", base),
                ("zero=z1", replace(base, zero="z1")),
                ("zero=z2", replace(base, zero="z2")),
                ("z2 + optimizer offload",
                 replace(base, zero="z2", offload_opt=True)))
    for label, st in variants:
        fp = footprint(model, normalize(model, st), system, batch=512)
        print("  %-24s tier1 %7.1f GB   tier2 %7.1f GB" % (
            label, fp.tier1_total / 1e9, fp.tier2_total / 1e9))


if __name__ == "__main__":
    main()
