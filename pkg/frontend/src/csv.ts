/**
 * Parser for oncoctrl per-step scenario CSVs.
 *
 * The column set is the simulator's fixed schema; any deviation is reported
 * with the offending column so a stale or foreign file fails loudly.
 */

export const SCHEMA = [
  "t", "x", "y", "x_ref", "y_ref", "u_ol", "v_ol", "u_mfc", "v_mfc",
  "u_cl", "v_cl", "eta_x", "eta_y", "fx_est", "fy_est", "int_u", "int_v",
] as const;

export type ColumnName = (typeof SCHEMA)[number];

export type ScenarioData = Record<ColumnName, number[]>;

export class SchemaError extends Error {}

export function parseScenarioCsv(text: string): ScenarioData {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length < 2) {
    throw new SchemaError("CSV has no data rows");
  }
  const header = lines[0].split(",");
  for (const column of SCHEMA) {
    if (!header.includes(column)) {
      throw new SchemaError(`missing required column: ${column}`);
    }
  }
  for (const column of header) {
    if (!(SCHEMA as readonly string[]).includes(column)) {
      throw new SchemaError(`unexpected column: ${column}`);
    }
  }
  const index = new Map(header.map((name, i) => [name, i]));
  const data = Object.fromEntries(
    SCHEMA.map((name) => [name, new Array<number>(lines.length - 1)]),
  ) as ScenarioData;

  for (let row = 1; row < lines.length; row++) {
    const parts = lines[row].split(",");
    if (parts.length !== header.length) {
      throw new SchemaError(
        `row ${row} has ${parts.length} fields, expected ${header.length}`,
      );
    }
    for (const name of SCHEMA) {
      const raw = parts[index.get(name)!];
      const value = Number(raw);
      if (Number.isNaN(value) && raw !== "nan" && raw !== "-nan") {
        throw new SchemaError(`row ${row}, column ${name}: not a number: ${raw}`);
      }
      data[name][row - 1] = value;
    }
  }
  return data;
}

/** Row index of the last sample with t <= horizonDays (inclusive slice end). */
export function horizonEnd(t: number[], horizonDays: number): number {
  let end = t.length;
  while (end > 1 && t[end - 1] > horizonDays) end--;
  return end;
}

export function clipColumns(
  data: ScenarioData,
  horizonDays: number | null,
): ScenarioData {
  if (horizonDays === null) return data;
  const end = horizonEnd(data.t, horizonDays);
  return Object.fromEntries(
    SCHEMA.map((name) => [name, data[name].slice(0, end)]),
  ) as ScenarioData;
}
