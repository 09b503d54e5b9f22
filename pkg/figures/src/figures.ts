import * as fs from 'fs';
import * as path from 'path';

import { column, readCsv } from './csv';
import { barChart, lineChart, Series } from './svg';

export interface FigureSpec {
    /** CSV file name inside the results directory */
    input: string;
    xColumn: string;
    yColumns: string[];
    /** one optional error column per y column ('' = none) */
    errColumns?: string[];
    title: string;
    xLabel: string;
    yLabel: string;
    /** output image file name */
    output: string;
    kind?: 'line' | 'bar';
    /** bar charts: divide values by the first row (normalized cost) */
    normalizeByFirst?: boolean;
}

/** The documented sweep CSVs and the figures rendered from each. */
export const FIGURES: FigureSpec[] = [
    {
        input: 'sweep_lambda.csv',
        xColumn: 'sweep_value',
        yColumns: ['mean_weighted_objective'],
        errColumns: ['std_weighted_objective'],
        title: 'Weighted objective vs. tradeoff',
        xLabel: 'tradeoff weight',
        yLabel: 'weighted objective',
        output: 'objective_vs_lambda.svg',
    },
    {
        input: 'sweep_snr.csv',
        xColumn: 'sweep_value',
        yColumns: ['mean_throughput'],
        errColumns: ['std_throughput'],
        title: 'Average sum-rate vs. SNR',
        xLabel: 'SNR (dB)',
        yLabel: 'sum-rate (bits/s/Hz)',
        output: 'sumrate_vs_snr.svg',
    },
    {
        input: 'sweep_ue.csv',
        xColumn: 'sweep_value',
        yColumns: ['mean_throughput'],
        errColumns: ['std_throughput'],
        title: 'Average sum-rate vs. number of UEs',
        xLabel: 'number of UEs',
        yLabel: 'sum-rate (bits/s/Hz)',
        output: 'sumrate_vs_ue.svg',
    },
    {
        input: 'sweep_ue.csv',
        xColumn: 'sweep_value',
        yColumns: ['mean_outer_iters', 'max_outer_iters'],
        title: 'Solver iterations vs. number of UEs',
        xLabel: 'number of UEs',
        yLabel: 'outer iterations',
        output: 'iterations_vs_ue.svg',
    },
    {
        input: 'sweep_cache.csv',
        xColumn: 'sweep_value',
        yColumns: ['mean_savings'],
        errColumns: ['std_savings'],
        title: 'Backhaul savings vs. cache size',
        xLabel: 'cache size (files)',
        yLabel: 'expected cache hits per request',
        output: 'savings_vs_cache.svg',
    },
    {
        input: 'sweep_cache.csv',
        xColumn: 'sweep_value',
        yColumns: ['mean_fetched_bits'],
        title: 'Normalized backhaul cost vs. cache size',
        xLabel: 'cache size (files)',
        yLabel: 'cost relative to smallest cache',
        output: 'normalized_cost_bars.svg',
        kind: 'bar',
        normalizeByFirst: true,
    },
];

/** Render one figure spec; returns the written file path. */
export function render(spec: FigureSpec, resultsDir: string,
                       outDir: string): string {
    const inputPath = path.join(resultsDir, spec.input);
    const table = readCsv(inputPath);
    const x = column(table, spec.xColumn, inputPath);
    let svg: string;
    if (spec.kind === 'bar') {
        let values = column(table, spec.yColumns[0], inputPath);
        if (spec.normalizeByFirst) {
            const ref = values[0];
            if (ref === 0) {
                throw new Error(
                    `cannot normalize ${spec.output}: first value is 0`);
            }
            values = values.map(v => v / ref);
        }
        svg = barChart(spec.title, spec.xLabel, spec.yLabel, x, values);
    } else {
        const series: Series[] = spec.yColumns.map((name, i) => {
            const s: Series = { label: name, y: column(table, name, inputPath) };
            const errName = spec.errColumns?.[i];
            if (errName) {
                s.err = column(table, errName, inputPath);
            }
            return s;
        });
        svg = lineChart(spec.title, spec.xLabel, spec.yLabel, x, series);
    }
    fs.mkdirSync(outDir, { recursive: true });
    const outPath = path.join(outDir, spec.output);
    fs.writeFileSync(outPath, svg);
    return outPath;
}

/** Render every figure whose input CSV exists; at least one must. */
export function makeAll(resultsDir: string, outDir: string): string[] {
    const written: string[] = [];
    const missing: string[] = [];
    for (const spec of FIGURES) {
        if (!fs.existsSync(path.join(resultsDir, spec.input))) {
            missing.push(spec.input);
            continue;
        }
        written.push(render(spec, resultsDir, outDir));
    }
    if (written.length === 0) {
        throw new Error(
            `no sweep CSVs found in ${resultsDir} (looked for ${missing.join(', ')})`);
    }
    return written;
}
