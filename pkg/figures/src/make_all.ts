#!/usr/bin/env node
import { makeAll } from './figures';

function main(argv: string[]): number {
    if (argv.length !== 2) {
        process.stderr.write('usage: make_all <results_dir> <out_dir>\n');
        return 2;
    }
    const [resultsDir, outDir] = argv;
    try {
        const written = makeAll(resultsDir, outDir);
        for (const file of written) {
            process.stdout.write(`wrote ${file}\n`);
        }
        return 0;
    } catch (err) {
        process.stderr.write(`make_all failed: ${(err as Error).message}\n`);
        return 1;
    }
}

process.exit(main(process.argv.slice(2)));
