"""Command-line front end: estimate | search | sweep | ablate.

All tabular output shares one fixed column prefix so downstream tooling can
consume any subcommand's CSV; each subcommand appends its own trailing
columns (search: reason; sweep: speedup_vs_first, reason; ablate:
slowdown_pct, reason).  Files are written atomically (write + rename) and
floats are serialized with repr() so identical runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys as _sys
from dataclasses import dataclass, replace

from .errors import Infeasible, InvalidStrategy, LlmcdError
from .hardware import INFINITE_BYTES, SystemSpec
from .model import ModelSpec
from .schedule import (RunEstimate, Strategy, TP_COMM_KINDS,
                       TP_OVERLAP_MODES, estimate)
from .search import SearchResult, SearchRow
from .search import search as run_search

CSV_PREFIX = ["axis_value", "tp", "pp", "dp", "ep", "es", "dp_exp",
              "microbatch", "interleave", "recompute", "zero", "tp_comm",
              "tp_overlap", "dp_overlap", "off_w", "off_a", "off_o",
              "step_s", "compute_s", "exposed_comm_s", "bubble_s",
              "recompute_s", "offload_s", "tier1_gb", "tokens_per_s", "mfu"]

SWEEP_AXES = ("gpus", "hbd_size", "su_bw", "so_bw", "flops", "hbm_bw",
              "hbm_cap", "sw_collectives", "no_overlap")

ABLATE_FLAGS = ("no_overlap", "sw_collectives")


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _strategy_cells(st: Strategy) -> list:
    return [st.tp, st.pp, st.dp, st.ep, st.es, st.dp_exp, st.microbatch,
            st.interleave, st.recompute, st.zero, st.tp_comm, st.tp_overlap,
            st.dp_overlap, st.offload_weights, st.offload_acts,
            st.offload_opt]


def row_cells(axis_value, st: Strategy, metrics) -> list:
    """One CSV row under the fixed prefix; metrics may be None (infeasible)."""
    cells = [axis_value] + _strategy_cells(st)
    if metrics is None:
        cells += [""] * 9
    else:
        (step, compute, exposed, bubble, recomp, offload,
         tier1_bytes, tps, mfu) = metrics
        cells += [step, compute, exposed, bubble, recomp, offload,
                  tier1_bytes / 1e9, tps, mfu]
    return cells


def write_csv(path: str, header: list, rows: list, footer_lines=()) -> None:
    """Atomic CSV write; a crashed run never leaves a partial file."""
    tmp = path + ".tmp"
    with open(tmp, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(c) for c in row) + "\n")
        for line in footer_lines:
            f.write("# " + line + "\n")
    os.replace(tmp, path)


def resolve_threads(cli_threads: int) -> int:
    env = os.environ.get("LLMCD_THREADS", "")
    if env:
        return max(1, int(env))
    return max(1, cli_threads)


def _load(args):
    model = ModelSpec.from_json(args.model)
    system = SystemSpec.from_json(args.system)
    return model, system


def _diag(kind: str, message: str) -> None:
    json.dump({"error": kind, "message": message}, _sys.stderr)
    _sys.stderr.write("\n")


def parse_pins(pin_args) -> dict:
    """--pin field=value[,value...] into an enumeration pins dict."""
    pins = {}
    for item in pin_args or ():
        field, _, raw = item.partition("=")
        if not raw:
            raise LlmcdError("--pin needs field=value, got %r" % item)
        vals = []
        for tok in raw.split(","):
            if tok in ("true", "false"):
                vals.append(tok == "true")
            else:
                try:
                    vals.append(int(tok))
                except ValueError:
                    vals.append(tok)
        pins[field.strip()] = vals if len(vals) > 1 else vals[0]
    return pins


# ---------------------------------------------------------------- estimate

def _strategy_from_args(args) -> Strategy:
    dp, rem = divmod(args.gpus, args.tp * args.pp)
    if rem != 0 or dp < 1:
        raise InvalidStrategy("total mod (tp*pp) != 0 (gpus=%d, tp=%d, pp=%d)"
                              % (args.gpus, args.tp, args.pp))
    return Strategy(tp=args.tp, pp=args.pp, dp=dp, ep=args.ep, es=args.es,
                    dp_exp=args.dp_exp, microbatch=args.microbatch,
                    interleave=args.interleave, recompute=args.recompute,
                    zero=args.zero, tp_comm=args.tp_comm,
                    tp_overlap=args.tp_overlap, dp_overlap=args.dp_overlap,
                    fused_activation=args.fused_activation,
                    offload_weights=args.offload_weights,
                    offload_acts=args.offload_acts,
                    offload_opt=args.offload_opt)


def cmd_estimate(args) -> int:
    model, system = _load(args)
    st = _strategy_from_args(args)
    est = estimate(model, system, st, args.batch, args.seq, args.precision)
    print(json.dumps(est.to_json_dict(), indent=2))
    return 0


# ------------------------------------------------------------------ search

def _search_metrics(row: SearchRow):
    return (row.step_time, row.compute_t, row.exposed_comm_t, row.bubble_t,
            row.recompute_t, row.offload_t, row.tier1_bytes,
            row.tokens_per_sec, row.mfu)


def run_search_to_csv(model, system, args, out_path: str,
                      threads: int) -> SearchResult:
    dump_rows = [] if args.dump_all else None

    def on_row(st, metrics, reason):
        if dump_rows is None:
            return
        cells = row_cells(len(dump_rows) + 1, st, metrics)
        cells.append(reason)
        dump_rows.append(cells)

    result = run_search(
        model, system, args.gpus, args.batch, seq=args.seq,
        precision=args.precision, top_n=args.top_n, threads=threads,
        nemo_default=args.nemo_default, no_overlap=args.no_overlap,
        pins=parse_pins(args.pin), on_row=on_row if args.dump_all else None)

    if dump_rows is not None:
        rows = dump_rows
    else:
        rows = []
        for rank, row in enumerate(result.rows, start=1):
            cells = row_cells(rank, row.strategy, _search_metrics(row))
            cells.append("")
            rows.append(cells)
    best = result.best
    footer = ["best=%s median=%s spread=%s evaluated=%d feasible=%d" % (
        _fmt(best.step_time) if best else "nan",
        _fmt(result.median_step()) if best else "nan",
        _fmt(result.spread()) if best else "nan",
        result.evaluated, result.feasible_count)]
    write_csv(out_path, CSV_PREFIX + ["reason"], rows, footer)
    return result


def cmd_search(args) -> int:
    model, system = _load(args)
    threads = resolve_threads(args.threads)
    result = run_search_to_csv(model, system, args, args.out, threads)
    best = result.best
    summary = {
        "model": model.name, "system": system.name, "gpus": args.gpus,
        "batch": args.batch, "evaluated": result.evaluated,
        "feasible": result.feasible_count,
        "infeasible_reasons": dict(result.infeasible_reasons),
        "enumeration_rejects": dict(result.enum_rejects),
        "csv": args.out,
    }
    if best is None:
        summary["best"] = None
    else:
        summary["best"] = {
            "step_time_s": best.step_time,
            "tokens_per_sec": best.tokens_per_sec, "mfu": best.mfu,
            "strategy": dict(zip(CSV_PREFIX[1:17],
                                 (_fmt(c) for c in
                                  _strategy_cells(best.strategy)))),
        }
    print(json.dumps(summary, indent=2))
    return 0


# ------------------------------------------------------------------- sweep

@dataclass(frozen=True)
class SweepSpec:
    """A sweep definition, usually loaded from a JSON file.

    values use the same units as system fixture files (GB/s, PF/s, GB,
    counts); "inf" is an accepted capacity sentinel.
    """

    axis: str
    values: tuple
    model: str
    system: str
    gpus: int
    batch: int
    seq: int = 0
    precision: str = "fp8"
    top_n: int = 1
    nemo_default: bool = False
    pins: dict = None  # enumeration restrictions, see search.pins

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise LlmcdError("unknown sweep axis %r" % self.axis)
        numeric = [v for v in self.values if v != "inf"]
        if any(b <= a for a, b in zip(numeric, numeric[1:])):
            raise LlmcdError("sweep values must be strictly increasing")

    @staticmethod
    def from_json(path: str) -> "SweepSpec":
        with open(path) as f:
            raw = json.load(f)
        raw["values"] = tuple(raw["values"])
        return SweepSpec(**raw)


def apply_axis(system: SystemSpec, axis: str, value):
    """Interpret one sweep point: returns (system, gpus_delta, no_overlap).

    gpus_delta is the gpu-count override (or 0) and no_overlap the search
    restriction implied by the axis.
    """
    if axis == "gpus":
        return system, int(value), False
    if axis == "no_overlap":
        return system, 0, bool(value)
    if axis == "sw_collectives":
        return replace(system, hw_collectives=not bool(value)), 0, False
    if axis == "hbd_size":
        return replace(system, hbd_size=int(value)), 0, False
    if axis == "su_bw":
        bw = float(value) * 1e9
        if system.topology == "full_flat":
            return replace(system, su_bw=bw, so_bw=bw), 0, False
        return replace(system, su_bw=bw), 0, False
    if axis == "so_bw":
        bw = float(value) * 1e9
        if system.topology == "full_flat":
            return replace(system, su_bw=bw, so_bw=bw), 0, False
        return replace(system, so_bw=bw), 0, False
    if axis == "flops":
        ratio = system.flops_fp16 / system.flops_fp8
        peak = float(value) * 1e15
        return replace(system, flops_fp8=peak, flops_fp16=peak * ratio), 0, False
    if axis == "hbm_bw":
        return replace(system, tier1_bw=float(value) * 1e9), 0, False
    if axis == "hbm_cap":
        cap = INFINITE_BYTES if value == "inf" else float(value) * 1e9
        return replace(system, tier1_cap=cap), 0, False
    raise LlmcdError("unknown sweep axis %r" % axis)


@dataclass(frozen=True)
class SweepPoint:
    axis_value: object
    best: SearchRow | None
    reason: str
    result: SearchResult | None


def run_sweep(spec: SweepSpec, threads: int = 1) -> list:
    """best-of-search at every axis point; infeasible points are recorded,

    never fatal.
    """
    model = ModelSpec.from_json(spec.model)
    base_system = SystemSpec.from_json(spec.system)
    points = []
    for value in spec.values:
        system, gpus_over, no_overlap = apply_axis(base_system, spec.axis, value)
        gpus = gpus_over or spec.gpus
        result = run_search(model, system, gpus, spec.batch,
                            seq=spec.seq, precision=spec.precision,
                            top_n=max(1, spec.top_n), threads=threads,
                            nemo_default=spec.nemo_default,
                            no_overlap=no_overlap, pins=spec.pins)
        if result.best is None:
            points.append(SweepPoint(value, None, "no feasible strategy",
                                     result))
        else:
            points.append(SweepPoint(value, result.best, "", result))
    return points


def sweep_points_to_rows(points: list) -> list:
    rows = []
    first_step = next((p.best.step_time for p in points if p.best), None)
    for p in points:
        if p.best is None:
            cells = row_cells(p.axis_value, Strategy(), None)
            cells += ["", p.reason]
        else:
            cells = row_cells(p.axis_value, p.best.strategy,
                              _search_metrics(p.best))
            cells += [first_step / p.best.step_time, ""]
        rows.append(cells)
    return rows


def cmd_sweep(args) -> int:
    spec = SweepSpec.from_json(args.spec)
    threads = resolve_threads(args.threads)
    points = run_sweep(spec, threads=threads)
    write_csv(args.out, CSV_PREFIX + ["speedup_vs_first", "reason"],
              sweep_points_to_rows(points))
    print(json.dumps({
        "axis": spec.axis,
        "points": [{"axis_value": p.axis_value,
                    "step_time_s": p.best.step_time if p.best else None,
                    "tokens_per_sec": p.best.tokens_per_sec if p.best else None,
                    "reason": p.reason} for p in points],
        "csv": args.out,
    }, indent=2))
    return 0


# ------------------------------------------------------------------ ablate

def run_ablate(model: ModelSpec, system: SystemSpec, gpus: int, batch: int,
               flags=ABLATE_FLAGS, seq: int = 0, precision: str = "fp8",
               threads: int = 1, pins: dict = None) -> list:
    """Slowdown of the search optimum when a capability is forced off."""
    base = run_search(model, system, gpus, batch, seq=seq,
                      precision=precision, top_n=1, threads=threads,
                      pins=pins)
    out = []
    for flag in flags:
        if flag == "no_overlap":
            flagged = run_search(model, system, gpus, batch, seq=seq,
                                 precision=precision, top_n=1,
                                 threads=threads, no_overlap=True, pins=pins)
        elif flag == "sw_collectives":
            sys2 = replace(system, hw_collectives=False)
            flagged = run_search(model, sys2, gpus, batch, seq=seq,
                                 precision=precision, top_n=1,
                                 threads=threads, pins=pins)
        else:
            raise LlmcdError("unknown ablation flag %r" % flag)
        if base.best is None or flagged.best is None:
            out.append((flag, None, None, "no feasible strategy"))
            continue
        slowdown = (flagged.best.step_time - base.best.step_time) \
            / base.best.step_time * 100.0
        out.append((flag, flagged.best, slowdown, ""))
    return out


def cmd_ablate(args) -> int:
    model, system = _load(args)
    threads = resolve_threads(args.threads)
    flags = args.flag or list(ABLATE_FLAGS)
    results = run_ablate(model, system, args.gpus, args.batch, flags,
                         seq=args.seq, precision=args.precision,
                         threads=threads, pins=parse_pins(args.pin))
    rows = []
    for flag, best, slowdown, reason in results:
        if best is None:
            cells = row_cells(flag, Strategy(), None) + ["", reason]
        else:
            cells = row_cells(flag, best.strategy, _search_metrics(best))
            cells += [slowdown, ""]
        rows.append(cells)
    write_csv(args.out, CSV_PREFIX + ["slowdown_pct", "reason"], rows)
    print(json.dumps({
        "ablations": [{"flag": f, "slowdown_pct": s, "reason": r}
                      for f, _, s, r in results],
        "csv": args.out,
    }, indent=2))
    return 0


# ------------------------------------------------------------------ parser

def _add_common(p):
    p.add_argument("--model", required=True,
                   help="model fixture name or JSON path")
    p.add_argument("--system", required=True,
                   help="system fixture name or JSON path")
    p.add_argument("--batch", type=int, default=1024)
    p.add_argument("--seq", type=int, default=0,
                   help="override the model's sequence length")
    p.add_argument("--precision", choices=("fp8", "fp16"), default="fp8")
    p.add_argument("--threads", type=int, default=1,
                   help="worker processes (LLMCD_THREADS overrides)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="llmcd",
        description="Analytical design-space exploration for LLM training "
                    "at data-center scale")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="price one strategy, print JSON")
    _add_common(p)
    p.add_argument("--gpus", type=int, required=True)
    p.add_argument("--tp", type=int, default=1)
    p.add_argument("--pp", type=int, default=1)
    p.add_argument("--ep", type=int, default=1)
    p.add_argument("--es", type=int, default=1)
    p.add_argument("--dp-exp", type=int, default=0,
                   help="0 derives it from the product invariant")
    p.add_argument("--microbatch", type=int, default=1)
    p.add_argument("--interleave", type=int, default=1)
    p.add_argument("--recompute", choices=("none", "attn_only", "full"),
                   default="none")
    p.add_argument("--zero", choices=("z0", "z1", "z2"), default="z0")
    p.add_argument("--tp-comm", choices=TP_COMM_KINDS, default="allreduce")
    p.add_argument("--tp-overlap", choices=TP_OVERLAP_MODES, default="none")
    p.add_argument("--dp-overlap", action="store_true")
    p.add_argument("--fused-activation", action="store_true")
    p.add_argument("--offload-weights", action="store_true")
    p.add_argument("--offload-acts", action="store_true")
    p.add_argument("--offload-opt", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("search", help="rank the full strategy space to CSV")
    _add_common(p)
    p.add_argument("--gpus", type=int, required=True)
    p.add_argument("--top-n", type=int, default=5000)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--nemo-default", action="store_true",
                   help="restrict to tp=es, ep=E")
    p.add_argument("--no-overlap", action="store_true",
                   help="forbid comm/compute overlap")
    p.add_argument("--pin", action="append", metavar="FIELD=VAL[,VAL]",
                   help="restrict one strategy field, e.g. --pin zero=z1")
    p.add_argument("--dump-all", action="store_true",
                   help="write every evaluated strategy, not just top-n")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("sweep", help="best-of-search along a hardware axis")
    p.add_argument("--spec", required=True, help="SweepSpec JSON path")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ablate",
                       help="slowdown from disabling overlap / hw collectives")
    _add_common(p)
    p.add_argument("--gpus", type=int, required=True)
    p.add_argument("--flag", action="append", choices=ABLATE_FLAGS,
                   help="repeatable; default: all flags")
    p.add_argument("--pin", action="append", metavar="FIELD=VAL[,VAL]",
                   help="restrict one strategy field, e.g. --pin zero=z1")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_ablate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidStrategy as exc:
        _diag("invalid_strategy", str(exc))
        return 2
    except Infeasible as exc:
        _diag("infeasible", str(exc))
        return 3
    except (LlmcdError, FileNotFoundError, KeyError, ValueError) as exc:
        _diag("error", "%s: %s" % (type(exc).__name__, exc))
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
