/** Minimal deterministic SVG chart builder (no DOM, no timestamps). */

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { left: 70, right: 24, top: 40, bottom: 52 };
const PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e'];

export interface Series {
    label: string;
    y: number[];
    /** symmetric error bar half-heights, optional */
    err?: number[];
}

function niceTicks(lo: number, hi: number, count = 5): number[] {
    if (!(hi > lo)) {
        return [lo];
    }
    const span = hi - lo;
    const step = Math.pow(10, Math.floor(Math.log10(span / count)));
    const candidates = [step, 2 * step, 5 * step, 10 * step];
    const chosen = candidates.find(s => span / s <= count + 1) ?? 10 * step;
    const first = Math.ceil(lo / chosen) * chosen;
    const ticks: number[] = [];
    for (let t = first; t <= hi + 1e-12; t += chosen) {
        ticks.push(Number(t.toPrecision(12)));
    }
    return ticks;
}

function fmt(v: number): string {
    if (v === 0) return '0';
    const a = Math.abs(v);
    if (a >= 1000 || a < 0.01) return v.toExponential(1);
    return Number(v.toPrecision(4)).toString();
}

class Canvas {
    parts: string[] = [];

    constructor(title: string) {
        this.parts.push(
            `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
            `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
            `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15" font-weight="bold">${escapeXml(title)}</text>`);
    }

    finish(): string {
        this.parts.push('</svg>');
        return this.parts.join('\n') + '\n';
    }
}

function escapeXml(s: string): string {
    return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

interface Scale {
    (v: number): number;
}

function makeScales(xs: number[], ys: number[]): { sx: Scale; sy: Scale; x0: number; x1: number; y0: number; y1: number } {
    let x0 = Math.min(...xs), x1 = Math.max(...xs);
    let y0 = Math.min(...ys), y1 = Math.max(...ys);
    if (x0 === x1) { x0 -= 1; x1 += 1; }
    if (y0 === y1) { y0 -= 1; y1 += 1; }
    const pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    const plotW = WIDTH - MARGIN.left - MARGIN.right;
    const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
    return {
        sx: v => MARGIN.left + ((v - x0) / (x1 - x0)) * plotW,
        sy: v => HEIGHT - MARGIN.bottom - ((v - y0) / (y1 - y0)) * plotH,
        x0, x1, y0, y1,
    };
}

function drawFrame(c: Canvas, s: ReturnType<typeof makeScales>,
                   xLabel: string, yLabel: string,
                   withXTicks: boolean): void {
    const bottom = HEIGHT - MARGIN.bottom;
    c.parts.push(
        `<line x1="${MARGIN.left}" y1="${bottom}" x2="${WIDTH - MARGIN.right}" y2="${bottom}" stroke="black"/>`,
        `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${bottom}" stroke="black"/>`);
    if (withXTicks) {
        for (const t of niceTicks(s.x0, s.x1)) {
            const x = s.sx(t);
            c.parts.push(
                `<line x1="${x}" y1="${bottom}" x2="${x}" y2="${bottom + 5}" stroke="black"/>`,
                `<text x="${x}" y="${bottom + 20}" text-anchor="middle" font-family="sans-serif" font-size="11">${fmt(t)}</text>`);
        }
    }
    for (const t of niceTicks(s.y0, s.y1)) {
        const y = s.sy(t);
        c.parts.push(
            `<line x1="${MARGIN.left - 5}" y1="${y}" x2="${MARGIN.left}" y2="${y}" stroke="black"/>`,
            `<text x="${MARGIN.left - 9}" y="${y + 4}" text-anchor="end" font-family="sans-serif" font-size="11">${fmt(t)}</text>`);
    }
    c.parts.push(
        `<text x="${(MARGIN.left + WIDTH - MARGIN.right) / 2}" y="${HEIGHT - 12}" text-anchor="middle" font-family="sans-serif" font-size="13">${escapeXml(xLabel)}</text>`,
        `<text x="18" y="${(MARGIN.top + bottom) / 2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 ${(MARGIN.top + bottom) / 2})">${escapeXml(yLabel)}</text>`);
}

function drawLegend(c: Canvas, labels: string[]): void {
    labels.forEach((label, i) => {
        const y = MARGIN.top + 8 + i * 18;
        const x = WIDTH - MARGIN.right - 170;
        c.parts.push(
            `<g class="legend-entry">` +
            `<line x1="${x}" y1="${y}" x2="${x + 24}" y2="${y}" stroke="${PALETTE[i % PALETTE.length]}" stroke-width="2"/>` +
            `<text x="${x + 30}" y="${y + 4}" font-family="sans-serif" font-size="12">${escapeXml(label)}</text>` +
            `</g>`);
    });
}

/** Multi-series line chart with optional error bars. */
export function lineChart(title: string, xLabel: string, yLabel: string,
                          x: number[], series: Series[]): string {
    const c = new Canvas(title);
    const allY = series.flatMap(s =>
        s.y.flatMap((v, i) => s.err ? [v - s.err[i], v + s.err[i]] : [v]));
    const scales = makeScales(x, allY);
    drawFrame(c, scales, xLabel, yLabel, true);
    series.forEach((s, idx) => {
        const color = PALETTE[idx % PALETTE.length];
        const points = x.map((xv, i) =>
            `${scales.sx(xv).toFixed(2)},${scales.sy(s.y[i]).toFixed(2)}`);
        c.parts.push(
            `<polyline fill="none" stroke="${color}" stroke-width="2" points="${points.join(' ')}"/>`);
        x.forEach((xv, i) => {
            c.parts.push(
                `<circle cx="${scales.sx(xv).toFixed(2)}" cy="${scales.sy(s.y[i]).toFixed(2)}" r="3.5" fill="${color}"/>`);
            if (s.err) {
                const px = scales.sx(xv).toFixed(2);
                const lo = scales.sy(s.y[i] - s.err[i]).toFixed(2);
                const hi = scales.sy(s.y[i] + s.err[i]).toFixed(2);
                c.parts.push(
                    `<line x1="${px}" y1="${lo}" x2="${px}" y2="${hi}" stroke="${color}" stroke-width="1"/>`);
            }
        });
    });
    if (series.length > 1) {
        drawLegend(c, series.map(s => s.label));
    }
    return c.finish();
}

/** Single-series bar chart; bars are labeled directly, no x ticks. */
export function barChart(title: string, xLabel: string, yLabel: string,
                         labels: number[], values: number[]): string {
    const c = new Canvas(title);
    const scales = makeScales([-0.5, labels.length - 0.5],
                              [0, ...values]);
    drawFrame(c, scales, xLabel, yLabel, false);
    const slot = (WIDTH - MARGIN.left - MARGIN.right) / labels.length;
    values.forEach((v, i) => {
        const barW = slot * 0.6;
        const x = MARGIN.left + slot * i + (slot - barW) / 2;
        const yTop = scales.sy(v);
        const y0 = scales.sy(0);
        c.parts.push(
            `<rect x="${x.toFixed(2)}" y="${Math.min(yTop, y0).toFixed(2)}" width="${barW.toFixed(2)}" height="${Math.abs(y0 - yTop).toFixed(2)}" fill="${PALETTE[0]}"/>`,
            `<text x="${(x + barW / 2).toFixed(2)}" y="${HEIGHT - MARGIN.bottom + 20}" text-anchor="middle" font-family="sans-serif" font-size="11">${fmt(labels[i])}</text>`);
    });
    return c.finish();
}
