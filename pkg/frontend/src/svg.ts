/* Minimal deterministic SVG assembly: fixed canvas, fixed palette, all
 * coordinates rounded to 0.01 px so output is byte-stable for equal input. */

export const PALETTE = [
    "#8b1a1a", "#1f4e9c", "#2e7d32", "#e07b00",
    "#6a3d9a", "#00838f", "#b0368e", "#555555",
];

export function px(v: number): string {
    const r = Math.round(v * 100) / 100;
    return Object.is(r, -0) ? "0" : String(r);
}

export function esc(s: string): string {
    return s.replace(/&/g, "&amp;").replace(/</g, "&lt;")
        .replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

export function tag(name: string, attrs: Record<string, string>, body = ""): string {
    const parts = Object.entries(attrs)
        .map(([k, v]) => `${k}="${esc(v)}"`)
        .join(" ");
    if (body === "") {
        return `<${name} ${parts}/>`;
    }
    return `<${name} ${parts}>${body}</${name}>`;
}

export function text(x: number, y: number, s: string,
                     extra: Record<string, string> = {}): string {
    return tag("text", {
        x: px(x), y: px(y),
        "font-family": "sans-serif", "font-size": "12",
        fill: "#222", ...extra,
    }, esc(s));
}

export function svgDocument(width: number, height: number, body: string): string {
    return [
        `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
        tag("rect", { x: "0", y: "0", width: String(width), height: String(height), fill: "#ffffff" }),
        body,
        "</svg>",
    ].join("\n");
}

export interface LinearScale {
    (v: number): number;
    domain: [number, number];
}

/* Maps [lo, hi] to [rlo, rhi]; a degenerate domain is widened so single
 * points land mid-range instead of dividing by zero. */
export function linearScale(lo: number, hi: number, rlo: number, rhi: number): LinearScale {
    if (lo === hi) {
        lo -= 1;
        hi += 1;
    }
    const f = ((v: number) => rlo + (v - lo) / (hi - lo) * (rhi - rlo)) as LinearScale;
    f.domain = [lo, hi];
    return f;
}

/* Round count ticks spanning the domain, endpoints included. */
export function ticks(lo: number, hi: number, count: number): number[] {
    const out: number[] = [];
    for (let i = 0; i < count; i++) {
        out.push(lo + (hi - lo) * i / (count - 1));
    }
    return out;
}

export function fmtTick(v: number): string {
    if (v === 0) {
        return "0";
    }
    const a = Math.abs(v);
    if (a >= 1e6 || a < 1e-3) {
        return v.toExponential(1).replace("e+", "e");
    }
    if (Number.isInteger(v)) {
        return String(v);
    }
    return String(Math.round(v * 1000) / 1000);
}
