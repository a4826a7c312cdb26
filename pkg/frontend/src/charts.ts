/* Chart builders over parsed llmcd CSV tables.
 *
 * Build and render are split so the data extraction (series grouping, the
 * stack-sum check, malformed-row skipping) is testable without string
 * matching on SVG. */

import { Table, cell, columnIndex, numericCell } from "./csv.js";
import { PALETTE, fmtTick, linearScale, px, svgDocument, tag, text, ticks } from "./svg.js";

export class StackSumError extends Error {
    constructor(rowNum: number, sum: number, step: number) {
        super(`row ${rowNum}: segments sum to ${sum} but step_s is ${step} ` +
            `(off by more than 0.1%)`);
        this.name = "StackSumError";
    }
}

// ---------------------------------------------------------------- sweep ---

export interface SweepOptions {
    x: string;
    y: string;
    group: string;
    log2x?: boolean;  // override the automatic axis choice
}

export interface SweepPoint {
    x: number;
    y: number;
}

export interface SweepSeries {
    key: string;
    points: SweepPoint[];
}

export interface SweepModel {
    series: SweepSeries[];
    log2X: boolean;
    xLabel: string;
    yLabel: string;
    groupLabel: string;
    warnings: string[];
}

function isPow2(v: number): boolean {
    return Number.isInteger(v) && v >= 1 && (v & (v - 1)) === 0;
}

/* gpus and link bandwidths are sampled geometrically, so those axes read in
 * log2; the generic axis_value column gets log2 only when every sample is a
 * power of two. */
function wantsLog2(name: string, values: number[]): boolean {
    if (name === "gpus" || name.endsWith("_bw")) {
        return true;
    }
    const distinct = new Set(values);
    return distinct.size >= 2 && values.every(isPow2);
}

export function buildSweep(table: Table, opts: SweepOptions): SweepModel {
    const xi = columnIndex(table, opts.x);
    const yi = columnIndex(table, opts.y);
    const gi = columnIndex(table, opts.group);
    const order: string[] = [];
    const byKey = new Map<string, SweepPoint[]>();
    const warnings: string[] = [];
    const xs: number[] = [];
    table.rows.forEach((row, i) => {
        const x = numericCell(row, xi);
        const y = numericCell(row, yi);
        if (!Number.isFinite(x) || !Number.isFinite(y)) {
            warnings.push(`row ${i + 1}: non-numeric ${opts.x}/${opts.y}, skipped`);
            return;
        }
        const key = cell(row, gi);
        if (!byKey.has(key)) {
            byKey.set(key, []);
            order.push(key);
        }
        byKey.get(key)!.push({ x, y });
        xs.push(x);
    });
    const log2X = opts.log2x !== undefined ? opts.log2x : wantsLog2(opts.x, xs);
    return {
        series: order.map((key) => ({ key, points: byKey.get(key)! })),
        log2X,
        xLabel: opts.x,
        yLabel: opts.y,
        groupLabel: opts.group,
        warnings,
    };
}

const W = 720;
const H = 480;
const MARGIN = { left: 72, right: 168, top: 24, bottom: 56 };

export function renderSweep(model: SweepModel): string {
    const plotW = W - MARGIN.left - MARGIN.right;
    const plotH = H - MARGIN.top - MARGIN.bottom;
    const pts = model.series.flatMap((s) => s.points);
    const xform = (v: number) => (model.log2X ? Math.log2(v) : v);
    const xv = pts.map((p) => xform(p.x));
    const yv = pts.map((p) => p.y);
    const sx = linearScale(Math.min(...xv), Math.max(...xv),
                           MARGIN.left, MARGIN.left + plotW);
    const yMax = Math.max(...yv, 0);
    const sy = linearScale(0, yMax * 1.05 || 1, MARGIN.top + plotH, MARGIN.top);

    const parts: string[] = [];
    parts.push(tag("line", {
        x1: px(MARGIN.left), y1: px(MARGIN.top + plotH),
        x2: px(MARGIN.left + plotW), y2: px(MARGIN.top + plotH),
        stroke: "#222",
    }));
    parts.push(tag("line", {
        x1: px(MARGIN.left), y1: px(MARGIN.top),
        x2: px(MARGIN.left), y2: px(MARGIN.top + plotH),
        stroke: "#222",
    }));

    const xTicks = model.log2X
        ? [...new Set(pts.map((p) => p.x))].sort((a, b) => a - b)
        : ticks(sx.domain[0], sx.domain[1], 5);
    for (const t of xTicks) {
        const xp = sx(xform(t));
        parts.push(tag("line", {
            x1: px(xp), y1: px(MARGIN.top + plotH),
            x2: px(xp), y2: px(MARGIN.top + plotH + 5), stroke: "#222",
        }));
        parts.push(text(xp, MARGIN.top + plotH + 18, fmtTick(t),
                        { "text-anchor": "middle" }));
    }
    for (const t of ticks(0, sy.domain[1], 5)) {
        const yp = sy(t);
        parts.push(tag("line", {
            x1: px(MARGIN.left - 5), y1: px(yp),
            x2: px(MARGIN.left), y2: px(yp), stroke: "#222",
        }));
        parts.push(text(MARGIN.left - 8, yp + 4, fmtTick(t),
                        { "text-anchor": "end" }));
    }
    parts.push(text(MARGIN.left + plotW / 2, H - 12,
                    model.xLabel + (model.log2X ? " (log2)" : ""),
                    { "text-anchor": "middle" }));
    parts.push(text(14, MARGIN.top + plotH / 2, model.yLabel, {
        "text-anchor": "middle",
        transform: `rotate(-90 14 ${px(MARGIN.top + plotH / 2)})`,
    }));

    model.series.forEach((s, i) => {
        const color = PALETTE[i % PALETTE.length];
        const coords = s.points.map(
            (p) => [sx(xform(p.x)), sy(p.y)] as [number, number]);
        if (coords.length > 1) {
            parts.push(tag("polyline", {
                points: coords.map(([x, y]) => `${px(x)},${px(y)}`).join(" "),
                fill: "none", stroke: color, "stroke-width": "2",
            }));
        }
        for (const [x, y] of coords) {
            parts.push(tag("circle", {
                cx: px(x), cy: px(y), r: "3.5", fill: color,
            }));
        }
        const ly = MARGIN.top + 12 + i * 18;
        const lx = MARGIN.left + plotW + 16;
        parts.push(tag("rect", {
            x: px(lx), y: px(ly - 9), width: "12", height: "12", fill: color,
        }));
        parts.push(text(lx + 18, ly + 1, `${model.groupLabel}=${s.key}`));
    });

    return svgDocument(W, H, parts.join("\n"));
}

// ------------------------------------------------------------ breakdown ---

export const SEGMENTS = [
    "compute_s", "exposed_comm_s", "bubble_s", "recompute_s", "offload_s",
] as const;

export const SEGMENT_COLORS: Record<string, string> = {
    compute_s: "#4878a8",
    exposed_comm_s: "#c44e52",
    bubble_s: "#dd8452",
    recompute_s: "#937860",
    offload_s: "#8172b3",
};

export interface BreakdownSegment {
    name: string;
    value: number;
}

export interface BreakdownBar {
    label: string;
    step: number;
    segments: BreakdownSegment[];
}

export interface BreakdownModel {
    bars: BreakdownBar[];
    warnings: string[];
}

function barLabel(table: Table, row: string[], rowNum: number): string {
    const parts: string[] = [];
    for (const name of ["tp", "pp", "dp", "ep", "es"]) {
        const idx = table.header.indexOf(name);
        if (idx < 0) {
            return `row ${rowNum}`;
        }
        parts.push(name + cell(row, idx));
    }
    return parts.join(" ");
}

export function buildBreakdown(table: Table): BreakdownModel {
    const stepIdx = columnIndex(table, "step_s");
    const segIdx = SEGMENTS.map((name) => columnIndex(table, name));
    const bars: BreakdownBar[] = [];
    const warnings: string[] = [];
    table.rows.forEach((row, i) => {
        const step = numericCell(row, stepIdx);
        const values = segIdx.map((idx) => numericCell(row, idx));
        if (!Number.isFinite(step) || values.some((v) => !Number.isFinite(v))) {
            warnings.push(`row ${i + 1}: malformed step components, skipped`);
            return;
        }
        const sum = values.reduce((a, b) => a + b, 0);
        if (Math.abs(sum - step) > 1e-3 * step) {
            throw new StackSumError(i + 1, sum, step);
        }
        bars.push({
            label: barLabel(table, row, i + 1),
            step,
            segments: SEGMENTS.map((name, j) => ({ name, value: values[j] })),
        });
    });
    return { bars, warnings };
}

export function renderBreakdown(model: BreakdownModel): string {
    const barW = 48;
    const gap = 28;
    const left = 72;
    const legendW = 170;
    const width = left + model.bars.length * (barW + gap) + legendW;
    const height = H;
    const plotH = height - MARGIN.top - MARGIN.bottom;
    const maxStep = Math.max(...model.bars.map((b) => b.step), 0);
    const sy = linearScale(0, maxStep || 1, MARGIN.top + plotH, MARGIN.top);

    const parts: string[] = [];
    parts.push(tag("line", {
        x1: px(left), y1: px(MARGIN.top),
        x2: px(left), y2: px(MARGIN.top + plotH), stroke: "#222",
    }));
    parts.push(tag("line", {
        x1: px(left), y1: px(MARGIN.top + plotH),
        x2: px(width - legendW), y2: px(MARGIN.top + plotH), stroke: "#222",
    }));
    for (const t of ticks(0, sy.domain[1], 5)) {
        parts.push(text(left - 8, sy(t) + 4, fmtTick(t), { "text-anchor": "end" }));
    }
    parts.push(text(14, MARGIN.top + plotH / 2, "seconds per step", {
        "text-anchor": "middle",
        transform: `rotate(-90 14 ${px(MARGIN.top + plotH / 2)})`,
    }));

    model.bars.forEach((bar, i) => {
        const x = left + gap / 2 + i * (barW + gap);
        let base = MARGIN.top + plotH;
        for (const seg of bar.segments) {
            if (seg.value === 0) {
                continue;
            }
            const h = seg.value / sy.domain[1] * plotH;
            base -= h;
            parts.push(tag("rect", {
                x: px(x), y: px(base), width: px(barW), height: px(h),
                fill: SEGMENT_COLORS[seg.name],
                "data-seg": seg.name, "data-value": String(seg.value),
            }));
        }
        parts.push(text(x + barW / 2, MARGIN.top + plotH + 16, bar.label, {
            "text-anchor": "middle", "font-size": "9",
        }));
    });

    SEGMENTS.forEach((name, i) => {
        const lx = width - legendW + 12;
        const ly = MARGIN.top + 12 + i * 18;
        parts.push(tag("rect", {
            x: px(lx), y: px(ly - 9), width: "12", height: "12",
            fill: SEGMENT_COLORS[name],
        }));
        parts.push(text(lx + 18, ly + 1, name));
    });

    return svgDocument(width, height, parts.join("\n"));
}
