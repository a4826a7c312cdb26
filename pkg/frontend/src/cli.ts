#!/usr/bin/env node
/* figs: render llmcd CSV output to SVG charts.
 *
 *   figs plot_sweep --csv sweep.csv --out sweep.svg [--x COL --y COL --group COL]
 *   figs plot_breakdown --csv ranked.csv --out breakdown.svg
 *
 * Exit codes: 0 ok, 1 data violates the output contract, 2 bad invocation
 * or missing column. */

import { writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { buildBreakdown, buildSweep, renderBreakdown, renderSweep, StackSumError } from "./charts.js";
import { MissingColumnError, readTable } from "./csv.js";

const USAGE = `usage: figs <plot_sweep|plot_breakdown> --csv PATH --out PATH
                 [--x COL] [--y COL] [--group COL] [--log2 | --linear]`;

export function main(argv: string[]): number {
    let parsed;
    try {
        parsed = parseArgs({
            args: argv,
            allowPositionals: true,
            options: {
                csv: { type: "string" },
                out: { type: "string" },
                x: { type: "string", default: "axis_value" },
                y: { type: "string", default: "step_s" },
                group: { type: "string", default: "tp" },
                log2: { type: "boolean", default: false },
                linear: { type: "boolean", default: false },
            },
        });
    } catch (err) {
        process.stderr.write(`${(err as Error).message}\n${USAGE}\n`);
        return 2;
    }
    const [command] = parsed.positionals;
    const opts = parsed.values;
    if (!command || !opts.csv || !opts.out) {
        process.stderr.write(USAGE + "\n");
        return 2;
    }
    const sweep = command === "plot_sweep" || command === "plot-sweep";
    const breakdown = command === "plot_breakdown" || command === "plot-breakdown";
    if (!sweep && !breakdown) {
        process.stderr.write(`unknown subcommand '${command}'\n${USAGE}\n`);
        return 2;
    }

    try {
        const table = readTable(opts.csv);
        let svg: string;
        let summary: Record<string, unknown>;
        if (sweep) {
            const model = buildSweep(table, {
                x: opts.x!, y: opts.y!, group: opts.group!,
                log2x: opts.log2 ? true : opts.linear ? false : undefined,
            });
            for (const w of model.warnings) {
                process.stderr.write(`warning: ${w}\n`);
            }
            svg = renderSweep(model);
            summary = {
                out: opts.out,
                series: model.series.length,
                points: model.series.reduce((n, s) => n + s.points.length, 0),
                log2_x: model.log2X,
                skipped: model.warnings.length,
            };
        } else {
            const model = buildBreakdown(table);
            for (const w of model.warnings) {
                process.stderr.write(`warning: ${w}\n`);
            }
            svg = renderBreakdown(model);
            summary = {
                out: opts.out,
                bars: model.bars.length,
                skipped: model.warnings.length,
            };
        }
        writeFileSync(opts.out, svg);
        process.stdout.write(JSON.stringify(summary, null, 2) + "\n");
        return 0;
    } catch (err) {
        if (err instanceof MissingColumnError) {
            process.stderr.write(err.message + "\n");
            return 2;
        }
        if (err instanceof StackSumError) {
            process.stderr.write(err.message + "\n");
            return 1;
        }
        process.stderr.write(`${(err as Error).message}\n`);
        return 2;
    }
}

const entry = process.argv[1];
if (entry && import.meta.url === pathToFileURL(entry).href) {
    process.exit(main(process.argv.slice(2)));
}
