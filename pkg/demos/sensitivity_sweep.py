#!/usr/bin/env python3
"""Hardware sensitivity: what does a bigger scale-up domain buy?

Sweeps the high-bandwidth-domain size of a two-tier cluster, re-running
the full strategy search at every point.  The interesting part is not just
the step time: the winning strategy changes shape, widening its expert
sharding and shedding pipeline stages as more ranks fit inside one domain.
Writes the sweep as CSV next to this script.
"""

import os

from llmcd.cli import CSV_PREFIX, SweepSpec, run_sweep, sweep_points_to_rows, write_csv


def main():
    spec = SweepSpec(axis="hbd_size",
                     values=(4, 8, 16, 32, 64),
                     model="gpt-1.8t", system="twotier-hbd64",
                     gpus=512, batch=512,
                     pins={"offload_weights": False,
                           "offload_acts": False,
                           "offload_opt": False,
                           "recompute": "none",
                           "tp_overlap": "ring",
                           "dp_overlap": True})
    points = run_sweep(spec)

    print("best-of-search on %s at %d GPUs while scaling %s" % (
        spec.system, spec.gpus, spec.axis))
    print()
    print("  hbd      step      mfu   winner")
    for p in points:
        if p.best is None:
            print("  %3g   %s" % (p.axis_value, p.reason))
            continue
        st = p.best.strategy
        print("  %3g   %7.3f s  %.3f   tp=%d pp=%d dp=%d es=%d %s" % (
            p.axis_value, p.best.step_time, p.best.mfu,
            st.tp, st.pp, st.dp, st.es, st.zero))
    print()
    first, last = points[0].best, points[-1].best
    print("growing the domain %gx buys a %.2fx faster step and"
          " lets es widen %dx" % (
              points[-1].axis_value / points[0].axis_value,
              first.step_time / last.step_time,
              last.strategy.es // first.strategy.es))

    out = os.path.join(os.path.dirname(__file__), "sweep_hbd_size.csv")
    write_csv(out, CSV_PREFIX + ["speedup_vs_first", "reason"],
              sweep_points_to_rows(points))
    print("wrote %s" % out)


if __name__ == "__main__":
    main()
