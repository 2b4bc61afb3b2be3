/**
 * Render figures from scenario CSVs.
 *
 * Usage:
 *   render --preset s1  --csv run.csv [--out fig.svg] [--full-horizon]
 *   render --preset s12 --csv fast.csv --csv2 slow.csv [--out fig.svg]
 *   render --preset s56 --csv run.csv [--out fig.svg]
 *   render --spec figure.json
 *
 * The JSON spec mirrors the flags:
 *   { "layout": "scenario" | "integral-comparison" | "disturbance",
 *     "csv": "...", "csv2": "...", "out": "...",
 *     "horizonDays": 30 | null }
 */

import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { parseScenarioCsv, SchemaError } from "./csv.js";
import {
  renderDisturbancePanels,
  renderIntegralComparison,
  renderScenarioPanels,
} from "./figures.js";

const PRESET_LAYOUTS: Record<string, string> = {
  s1: "scenario",
  s12: "integral-comparison",
  s56: "disturbance",
};

interface FigureSpec {
  layout: string;
  csv: string;
  csv2?: string;
  out: string;
  horizonDays?: number | null;
}

function fail(message: string): never {
  process.stderr.write(JSON.stringify({ error: message }) + "\n");
  process.exit(1);
}

function loadCsv(path: string) {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    fail(`cannot read ${path}: ${(err as Error).message}`);
  }
  try {
    return parseScenarioCsv(text);
  } catch (err) {
    if (err instanceof SchemaError) fail(`${path}: ${err.message}`);
    throw err;
  }
}

export function renderSpec(spec: FigureSpec): string {
  const data = loadCsv(spec.csv);
  switch (spec.layout) {
    case "scenario":
      return renderScenarioPanels(data, { horizonDays: spec.horizonDays }).svg;
    case "integral-comparison": {
      if (!spec.csv2) fail("integral-comparison needs a second CSV (--csv2)");
      const second = loadCsv(spec.csv2);
      return renderIntegralComparison(data, second, {
        firstLabel: "fast",
        secondLabel: "slow",
      }).svg;
    }
    case "disturbance":
      return renderDisturbancePanels(data).svg;
    default:
      fail(`unknown layout ${spec.layout}; use scenario, integral-comparison, or disturbance`);
  }
}

export function main(argv: string[]): number {
  const { values, positionals } = parseArgs({
    args: argv,
    allowPositionals: true,
    options: {
      preset: { type: "string" },
      spec: { type: "string" },
      csv: { type: "string" },
      csv2: { type: "string" },
      out: { type: "string" },
      "full-horizon": { type: "boolean", default: false },
    },
  });
  if (positionals[0] !== "render") {
    fail("usage: render --preset s1|s12|s56 --csv FILE [--csv2 FILE] [--out FILE]");
  }

  let spec: FigureSpec;
  if (values.spec) {
    spec = JSON.parse(readFileSync(values.spec, "utf8")) as FigureSpec;
    if (!spec.layout || !spec.csv || !spec.out) {
      fail("spec file needs layout, csv, and out fields");
    }
  } else {
    if (!values.preset || !values.csv) {
      fail("either --spec or both --preset and --csv are required");
    }
    const layout = PRESET_LAYOUTS[values.preset];
    if (!layout) fail(`unknown preset ${values.preset}; use s1, s12, or s56`);
    spec = {
      layout,
      csv: values.csv,
      csv2: values.csv2,
      out: values.out ?? `${values.preset}.svg`,
      horizonDays: values["full-horizon"] ? null : undefined,
    };
  }

  const svg = renderSpec(spec);
  writeFileSync(spec.out, svg, "utf8");
  process.stdout.write(`${spec.out}\n`);
  return 0;
}

const entry = process.argv[1];
if (entry && (entry.endsWith("cli.js") || entry.endsWith("cli.ts"))) {
  process.exit(main(process.argv.slice(2)));
}
