import * as fs from 'fs';

export interface Table {
    columns: string[];
    rows: Record<string, number>[];
}

/** Parse a harness CSV: header row plus purely numeric data cells. */
export function readCsv(path: string): Table {
    const text = fs.readFileSync(path, 'utf8').trim();
    if (text.length === 0) {
        throw new Error(`empty CSV: ${path}`);
    }
    const lines = text.split(/\r?\n/);
    const columns = lines[0].split(',').map(c => c.trim());
    const rows: Record<string, number>[] = [];
    for (let i = 1; i < lines.length; i++) {
        const cells = lines[i].split(',');
        if (cells.length !== columns.length) {
            throw new Error(
                `${path}:${i + 1}: expected ${columns.length} cells, got ${cells.length}`);
        }
        const row: Record<string, number> = {};
        columns.forEach((name, j) => {
            const value = Number(cells[j]);
            if (Number.isNaN(value)) {
                throw new Error(`${path}:${i + 1}: non-numeric cell '${cells[j]}' in column '${name}'`);
            }
            row[name] = value;
        });
        rows.push(row);
    }
    return { columns, rows };
}

/** Pull one column, failing loudly with the available names. */
export function column(table: Table, name: string, path: string): number[] {
    if (!table.columns.includes(name)) {
        throw new Error(
            `column '${name}' not found in ${path}; available: ${table.columns.join(', ')}`);
    }
    return table.rows.map(r => r[name]);
}
