import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import {
    SEGMENTS, StackSumError, buildBreakdown, buildSweep,
    renderBreakdown, renderSweep,
} from "../src/charts";
import { MissingColumnError, columnIndex, parseCsv } from "../src/csv";

const GOLDEN = fileURLToPath(new URL("./golden", import.meta.url));

function golden(name: string) {
    return parseCsv(readFileSync(join(GOLDEN, name), "utf8"));
}

const BREAKDOWN_HEADER = "step_s," + SEGMENTS.join(",");

describe("breakdown stacks", () => {
    it("segment sums equal step_s within 0.1% on every golden CSV", () => {
        for (const name of ["breakdown_hbd8.csv", "breakdown_fullflat.csv"]) {
            const model = buildBreakdown(golden(name));
            expect(model.bars.length).toBe(5);
            expect(model.warnings).toEqual([]);
            for (const bar of model.bars) {
                const sum = bar.segments.reduce((a, s) => a + s.value, 0);
                expect(Math.abs(sum - bar.step)).toBeLessThanOrEqual(1e-3 * bar.step);
            }
        }
    });

    it("rejects a stack that does not sum to step_s", () => {
        const t = parseCsv(`${BREAKDOWN_HEADER}\n2.0,1.0,0.0,0.0,0.0,0.0\n`);
        expect(() => buildBreakdown(t)).toThrow(StackSumError);
    });

    it("skips malformed rows with a warning, keeps the rest", () => {
        const t = parseCsv(`${BREAKDOWN_HEADER}\n` +
            "4.0,2.5,1.0,0.5,0.0,0.0\n" +
            ",2.5,1.0,0.5,0.0,0.0\n" +
            "1.0,0.4,oops,0.2,0.2,0.1\n" +
            "2.0,2.0,0.0,0.0,0.0,0.0\n");
        const model = buildBreakdown(t);
        expect(model.bars.length).toBe(2);
        expect(model.warnings.length).toBe(2);
        expect(model.warnings[0]).toContain("row 2");
        expect(model.warnings[1]).toContain("row 3");
    });

    it("renders exact segment heights for a hand-built file", () => {
        const t = parseCsv(`${BREAKDOWN_HEADER}\n` +
            "4.0,2.5,1.0,0.5,0.0,0.0\n" +
            "2.0,2.0,0.0,0.0,0.0,0.0\n" +
            "1.0,0.4,0.1,0.2,0.2,0.1\n");
        const svg = renderBreakdown(buildBreakdown(t));
        const rects = [...svg.matchAll(
            /<rect [^>]*height="([^"]+)"[^>]*data-seg="([^"]+)" data-value="([^"]+)"/g,
        )].map((m) => ({ h: Number(m[1]), seg: m[2], value: Number(m[3]) }));
        // plot height 400 px, max step 4.0 s -> 100 px per second
        const expected = [
            ["compute_s", 250], ["exposed_comm_s", 100], ["bubble_s", 50],
            ["compute_s", 200],
            ["compute_s", 40], ["exposed_comm_s", 10], ["bubble_s", 20],
            ["recompute_s", 20], ["offload_s", 10],
        ];
        expect(rects.length).toBe(expected.length);
        rects.forEach((r, i) => {
            expect(r.seg).toBe(expected[i][0]);
            expect(Math.abs(r.h - (expected[i][1] as number))).toBeLessThan(0.011);
        });
    });

    it("draws an all-compute row as a single segment", () => {
        const t = parseCsv(`${BREAKDOWN_HEADER}\n3.0,3.0,0.0,0.0,0.0,0.0\n`);
        const svg = renderBreakdown(buildBreakdown(t));
        const segs = [...svg.matchAll(/data-seg="([^"]+)"/g)].map((m) => m[1]);
        expect(segs).toEqual(["compute_s"]);
    });

    it("shows far more exposed communication on HBD8 than on FullFlat", () => {
        const share = (name: string) => {
            const bars = buildBreakdown(golden(name)).bars;
            const s = bars.map((b) =>
                b.segments.find((x) => x.name === "exposed_comm_s")!.value / b.step);
            return s.reduce((a, v) => a + v, 0) / s.length;
        };
        const hbd8 = share("breakdown_hbd8.csv");
        const flat = share("breakdown_fullflat.csv");
        expect(hbd8).toBeGreaterThan(0.1);
        expect(flat).toBeLessThan(0.01);
        expect(hbd8).toBeGreaterThan(10 * flat);
    });

    it("requires the step component columns", () => {
        const t = parseCsv("step_s,compute_s\n1.0,1.0\n");
        expect(() => buildBreakdown(t)).toThrow(MissingColumnError);
    });
});

describe("sweep series", () => {
    it("renders one series per group value on the strong-scaling file", () => {
        const t = golden("strong_scaling.csv");
        const tpIdx = columnIndex(t, "tp");
        const distinct = new Set(t.rows.map((r) => r[tpIdx]));
        const model = buildSweep(t, { x: "axis_value", y: "tokens_per_s", group: "tp" });
        expect(model.series.length).toBe(distinct.size);
        expect(model.series.map((s) => s.key).sort()).toEqual([...distinct].sort());
        const total = model.series.reduce((n, s) => n + s.points.length, 0);
        expect(total).toBe(t.rows.length);

        const svg = renderSweep(model);
        for (const key of distinct) {
            expect(svg).toContain(`tp=${key}`);
        }
        const markers = (svg.match(/<circle /g) ?? []).length;
        expect(markers).toBe(t.rows.length);
    });

    it("uses a log2 x axis for power-of-two GPU counts and bandwidth columns", () => {
        const scaling = buildSweep(golden("strong_scaling.csv"),
                                   { x: "axis_value", y: "step_s", group: "tp" });
        expect(scaling.log2X).toBe(true);

        const named = buildSweep(parseCsv("su_bw,step_s,tp\n100,2.0,4\n300,1.5,4\n"),
                                 { x: "su_bw", y: "step_s", group: "tp" });
        expect(named.log2X).toBe(true);

        const linear = buildSweep(parseCsv("axis_value,step_s,tp\n2.1,2.0,4\n3,1.5,4\n"),
                                  { x: "axis_value", y: "step_s", group: "tp" });
        expect(linear.log2X).toBe(false);

        const forced = buildSweep(golden("strong_scaling.csv"),
                                  { x: "axis_value", y: "step_s", group: "tp", log2x: false });
        expect(forced.log2X).toBe(false);
    });

    it("draws a single-row file as one marker and no line", () => {
        const t = parseCsv("axis_value,step_s,tp,reason\n64,1.5,8,\n");
        const model = buildSweep(t, { x: "axis_value", y: "step_s", group: "tp" });
        expect(model.series.length).toBe(1);
        expect(model.series[0].points).toEqual([{ x: 64, y: 1.5 }]);
        const svg = renderSweep(model);
        expect(svg).not.toContain("<polyline");
        expect((svg.match(/<circle /g) ?? []).length).toBe(1);
    });

    it("plots a ranked search file as a sorted spread curve", () => {
        const t = golden("breakdown_fullflat.csv");
        const model = buildSweep(t, { x: "axis_value", y: "step_s", group: "zero" });
        expect(model.series.length).toBe(1);
        expect(model.log2X).toBe(false);
        const ys = model.series[0].points.map((p) => p.y);
        const xs = model.series[0].points.map((p) => p.x);
        expect(xs).toEqual([1, 2, 3, 4, 5]);
        for (let i = 1; i < ys.length; i++) {
            expect(ys[i]).toBeGreaterThanOrEqual(ys[i - 1]);
        }
    });

    it("skips rows with empty metrics (infeasible sweep points) with a warning", () => {
        const t = parseCsv("axis_value,step_s,tp,reason\n" +
            "1,,0,no feasible strategy\n" +
            "64,1.5,8,\n" +
            "128,1.1,8,\n");
        const model = buildSweep(t, { x: "axis_value", y: "step_s", group: "tp" });
        expect(model.warnings.length).toBe(1);
        expect(model.warnings[0]).toContain("row 1");
        expect(model.series.length).toBe(1);
        expect(model.series[0].points.length).toBe(2);
    });

    it("names the available columns when one is missing", () => {
        const t = golden("strong_scaling.csv");
        let err: MissingColumnError | null = null;
        try {
            buildSweep(t, { x: "axis_value", y: "step_s", group: "bogus" });
        } catch (e) {
            err = e as MissingColumnError;
        }
        expect(err).not.toBeNull();
        expect(err!.columns).toEqual(t.header);
    });

    it("is deterministic: identical input renders identical SVG", () => {
        const build = () => renderSweep(buildSweep(golden("strong_scaling.csv"),
            { x: "axis_value", y: "tokens_per_s", group: "tp" }));
        expect(build()).toBe(build());
        const bd = () => renderBreakdown(buildBreakdown(golden("breakdown_hbd8.csv")));
        expect(bd()).toBe(bd());
    });
});
