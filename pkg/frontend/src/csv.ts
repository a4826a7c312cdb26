/* CSV reading for the llmcd output schema: one header line, comma-separated
 * data rows, then optional "# key=value" footer comment lines.  Cells never
 * contain commas or quotes, so no quoting rules apply. */

import { readFileSync } from "node:fs";

export interface Table {
    header: string[];
    rows: string[][];
    footers: string[];
}

export class MissingColumnError extends Error {
    readonly column: string;
    readonly columns: string[];

    constructor(column: string, columns: string[]) {
        super(`column '${column}' not in CSV; available: ${columns.join(", ")}`);
        this.name = "MissingColumnError";
        this.column = column;
        this.columns = columns;
    }
}

export function parseCsv(text: string): Table {
    const lines = text.split(/\r?\n/);
    let header: string[] | null = null;
    const rows: string[][] = [];
    const footers: string[] = [];
    for (const line of lines) {
        if (line.trim() === "") {
            continue;
        }
        if (line.startsWith("#")) {
            footers.push(line);
            continue;
        }
        if (header === null) {
            header = line.split(",");
        } else {
            rows.push(line.split(","));
        }
    }
    if (header === null) {
        throw new Error("empty CSV: no header line");
    }
    return { header, rows, footers };
}

export function readTable(path: string): Table {
    return parseCsv(readFileSync(path, "utf8"));
}

export function columnIndex(table: Table, name: string): number {
    const idx = table.header.indexOf(name);
    if (idx < 0) {
        throw new MissingColumnError(name, table.header);
    }
    return idx;
}

/* Cell accessor tolerant of short rows (missing trailing cells read as ""). */
export function cell(row: string[], idx: number): string {
    return idx < row.length ? row[idx] : "";
}

export function numericCell(row: string[], idx: number): number {
    const raw = cell(row, idx).trim();
    if (raw === "") {
        return NaN;
    }
    return Number(raw);
}
