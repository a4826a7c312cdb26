"""Machine description and single-op roofline timing.

A node is characterized by peak flops per precision, tier-1 (HBM-class) and
tier-2 (pooled/CXL-class) memory, and two network levels: scale-up within an
HBD of hbd_size GPUs and scale-out across HBDs.  full_flat topologies wire
scale-out at scale-up bandwidth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import InvalidModel
from .model import _load_fixture

TOPOLOGIES = ("two_tier", "full_flat")

# Capacity sentinel meaning "unbounded" (rendered as inf in CSVs).
INFINITE_BYTES = float(2 ** 62)


@dataclass(frozen=True)
class EfficiencyCurve:
    """Achievable fraction of a peak rate as a function of a size measure.

    Flat at anchor_eff above anchor_size; interpolated (linearly, or in
    log-size when log_interp) down to floor_eff, never below it.
    """

    anchor_size: float
    anchor_eff: float
    floor_size: float
    floor_eff: float
    log_interp: bool = False

    def eff(self, size: float) -> float:
        if size >= self.anchor_size:
            return self.anchor_eff
        if size <= self.floor_size:
            return self.floor_eff
        if self.log_interp:
            frac = (math.log(size) - math.log(self.floor_size)) / \
                (math.log(self.anchor_size) - math.log(self.floor_size))
        else:
            frac = (size - self.floor_size) / (self.anchor_size - self.floor_size)
        return self.floor_eff + frac * (self.anchor_eff - self.floor_eff)


# Matrix ops hit 99% of peak once every gemm dim reaches 128; below that the
# rate falls off linearly with the smallest dim, floored at 10%.
FLOP_CURVE = EfficiencyCurve(anchor_size=128.0, anchor_eff=0.99,
                             floor_size=128.0 * 0.10 / 0.99, floor_eff=0.10)
# HBM transfers reach 90% of peak at 100 MB, falling log-linearly to 5% at
# one 4 KiB page.
HBM_CURVE = EfficiencyCurve(anchor_size=100e6, anchor_eff=0.90,
                            floor_size=4096.0, floor_eff=0.05,
                            log_interp=True)
# Fraction of peak network bandwidth collectives actually achieve.
NET_EFFICIENCY = 0.80
# Tier-2 transfers run at a flat 90% of link bandwidth.
TIER2_EFFICIENCY = 0.90


def flop_eff(min_gemm_dim: float) -> float:
    if min_gemm_dim >= FLOP_CURVE.anchor_size:
        return FLOP_CURVE.anchor_eff
    return max(FLOP_CURVE.floor_eff,
               FLOP_CURVE.anchor_eff * min_gemm_dim / FLOP_CURVE.anchor_size)


def hbm_eff(bytes_moved: float) -> float:
    return HBM_CURVE.eff(bytes_moved)


@dataclass(frozen=True)
class SystemSpec:
    name: str
    flops_fp8: float        # flop/s
    flops_fp16: float       # flop/s
    tier1_bw: float         # bytes/s per GPU
    tier1_cap: float        # bytes per GPU
    tier2_bw: float         # bytes/s per GPU
    tier2_cap: float        # bytes per GPU
    hbd_size: int           # GPUs per high-bandwidth domain
    su_bw: float            # scale-up bytes/s per GPU
    so_bw: float            # scale-out bytes/s per GPU
    su_latency: float       # seconds per hop
    so_latency: float       # seconds per hop
    tier1_latency: float    # seconds (tier-2 path setup uses tier2_latency)
    tier2_latency: float
    cluster_gpus: int
    topology: str = "two_tier"
    hw_collectives: bool = True
    net_efficiency: float = NET_EFFICIENCY
    framework_overhead: float = 2e9  # bytes of tier-1 reserved by the stack

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise InvalidModel("%s: unknown topology %r" % (self.name, self.topology))
        if self.hbd_size < 1 or self.cluster_gpus < 1:
            raise InvalidModel("%s: hbd_size/cluster_gpus must be >= 1" % self.name)
        for f in ("flops_fp8", "flops_fp16", "tier1_bw", "tier1_cap",
                  "tier2_bw", "su_bw", "so_bw"):
            if getattr(self, f) <= 0:
                raise InvalidModel("%s: %s must be positive" % (self.name, f))
        if self.topology == "full_flat" and self.su_bw != self.so_bw:
            raise InvalidModel("%s: full_flat requires su_bw == so_bw" % self.name)

    def peak_flops(self, precision: str) -> float:
        return {"fp8": self.flops_fp8, "fp16": self.flops_fp16}[precision]

    @staticmethod
    def from_json(path_or_name: str) -> "SystemSpec":
        """Load a Table-style JSON file: FLOPS in PF/s, bandwidths in GB/s,

        capacities in GB, latencies in ns; converted to SI on load.
        """
        raw = _load_fixture("systems", path_or_name)
        conv = dict(raw)
        for k in ("flops_fp8", "flops_fp16"):
            conv[k] = raw[k] * 1e15
        for k in ("tier1_bw", "tier2_bw", "su_bw", "so_bw"):
            conv[k] = raw[k] * 1e9
        for k in ("tier1_cap", "tier2_cap", "framework_overhead"):
            if k in raw:
                conv[k] = INFINITE_BYTES if raw[k] == "inf" else raw[k] * 1e9
        for k in ("su_latency", "so_latency", "tier1_latency", "tier2_latency"):
            conv[k] = raw[k] * 1e-9
        return SystemSpec(**conv)

    def with_tier1_cap(self, cap_bytes: float) -> "SystemSpec":
        return replace(self, tier1_cap=cap_bytes)


def op_time(op, sys: SystemSpec, precision: str = "fp8") -> float:
    """Roofline time of one op: max of compute at the efficiency-adjusted

    peak and HBM streaming of all moved bytes.
    """
    peak = sys.peak_flops(precision)
    compute_t = 0.0
    if op.flops > 0:
        compute_t = op.flops / (peak * flop_eff(op.min_gemm_dim))
    moved = op.moved_bytes
    mem_t = 0.0
    if moved > 0:
        mem_t = moved / (sys.tier1_bw * hbm_eff(moved))
    return max(compute_t, mem_t)


def tier2_transfer_time(sys: SystemSpec, n_bytes: float) -> float:
    """One bulk transfer between tier-1 and tier-2 memory."""
    if n_bytes <= 0:
        return 0.0
    return n_bytes / (sys.tier2_bw * TIER2_EFFICIENCY) + sys.tier2_latency
