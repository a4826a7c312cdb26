#!/usr/bin/env python3
"""The scale-up domain knee: when experts fit inside the HBD.

Holds a mixture-of-experts strategy fixed while growing the high-bandwidth
domain.  Once hbd_size reaches the ep*es group span, expert all-to-all
traffic stops crossing the slow scale-out fabric and its share of the step
collapses.
"""

from dataclasses import replace

from llmcd.hardware import SystemSpec
from llmcd.model import ModelSpec
from llmcd.schedule import Strategy, estimate_detail


def main():
    model = ModelSpec.from_json("gpt-1.8t")
    base = SystemSpec.from_json("twotier-hbd64")
    strategy = Strategy(tp=8, pp=1, dp=64, ep=16, es=2, dp_exp=16,
                        microbatch=1, zero="z2", tp_comm="allreduce",
                        tp_overlap="ring", dp_overlap=True,
                        fused_activation=True)
    span = strategy.ep * strategy.es
    batch = 512

    print("%s at 512 GPUs; alltoall group spans %d ranks" % (
        model.name, span))
    print()
    print("  hbd   a2a tier   a2a exposed   scale-out share   step")
    for hbd in (4, 8, 16, 32, 64):
        system = replace(base, hbd_size=hbd)
        est, detail = estimate_detail(model, system, strategy, batch)
        lane = detail.lane("ep")
        share = detail.scale_out_exposed_t / est.step_time
        print("  %3d   %-8s  %8.3f s   %13.1f%%   %7.3f s" % (
            hbd, lane.tier, lane.exposed_t, 100.0 * share, est.step_time))
    print()
    print("the knee sits at hbd >= %d, where dispatch/combine stay"
          " on the scale-up tier" % span)


if __name__ == "__main__":
    main()
