import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { describe, expect, it } from "vitest";

import { parseScenarioCsv } from "../src/csv.js";
import {
  DEFAULT_HORIZON_DAYS,
  renderDisturbancePanels,
  renderIntegralComparison,
  renderScenarioPanels,
} from "../src/figures.js";
import { main } from "../src/cli.js";

const FIXTURES = resolve(__dirname, "..", "testdata");

function load(name: string) {
  return parseScenarioCsv(readFileSync(resolve(FIXTURES, name), "utf8"));
}

describe("four-panel scenario figure", () => {
  const data = load("fast.csv");

  it("renders four panels into a non-empty document", () => {
    const { svg } = renderScenarioPanels(data);
    expect(svg.startsWith("<svg")).toBe(true);
    expect(svg.match(/class="panel"/g)?.length).toBe(4);
    expect(svg.length).toBeGreaterThan(10_000);
  });

  it("plots CSV columns verbatim up to the 30-day clip", () => {
    const { plotted } = renderScenarioPanels(data);
    const n = plotted.t.length;
    expect(plotted.t[n - 1]).toBeLessThanOrEqual(DEFAULT_HORIZON_DAYS);
    expect(plotted.u_cl).toEqual(data.u_cl.slice(0, n));
    expect(plotted.x).toEqual(data.x.slice(0, n));
    expect(plotted.x_ref).toEqual(data.x_ref.slice(0, n));
    expect(plotted.y_ref).toEqual(data.y_ref.slice(0, n));
  });

  it("full-horizon option plots every sample", () => {
    const { plotted } = renderScenarioPanels(data, { horizonDays: null });
    expect(plotted.t.length).toBe(data.t.length);
    expect(plotted.u_cl).toEqual(data.u_cl);
  });

  it("does not mutate its input", () => {
    const before = data.x.slice();
    renderScenarioPanels(data);
    expect(data.x).toEqual(before);
  });
});

describe("cumulative-dose comparison figure", () => {
  const fast = load("fast.csv");
  const slow = load("slow.csv");

  it("terminal plotted totals equal the CSV terminal values exactly", () => {
    const result = renderIntegralComparison(fast, slow, {
      firstLabel: "fast",
      secondLabel: "slow",
    });
    expect(result.terminal.firstIntU).toBe(fast.int_u[fast.int_u.length - 1]);
    expect(result.terminal.firstIntV).toBe(fast.int_v[fast.int_v.length - 1]);
    expect(result.terminal.secondIntU).toBe(slow.int_u[slow.int_u.length - 1]);
    expect(result.terminal.secondIntV).toBe(slow.int_v[slow.int_v.length - 1]);
  });

  it("confirms the slow plan injects strictly less of both drugs", () => {
    const { terminal, svg } = renderIntegralComparison(fast, slow);
    expect(terminal.secondIntU).toBeLessThan(terminal.firstIntU);
    expect(terminal.secondIntV).toBeLessThan(terminal.firstIntV);
    expect(svg.match(/class="panel"/g)?.length).toBe(4);
  });

  it("plots the full cumulative series without resampling", () => {
    const { plotted } = renderIntegralComparison(fast, slow);
    expect(plotted.int_u_first).toEqual(fast.int_u);
    expect(plotted.int_v_second).toEqual(slow.int_v);
  });
});

describe("delivery-fraction figure", () => {
  const data = load("very-sick.csv");

  it("covers the full 60-day horizon in both panels", () => {
    const { svg, plotted } = renderDisturbancePanels(data);
    expect(svg.match(/class="panel"/g)?.length).toBe(2);
    expect(plotted.t.length).toBe(data.t.length);
    expect(plotted.t[plotted.t.length - 1]).toBeCloseTo(60, 9);
    expect(plotted.eta_x).toEqual(data.eta_x);
    expect(plotted.eta_y).toEqual(data.eta_y);
  });

  it("shows the stepped chemo fraction and the oscillating immuno fraction", () => {
    const { plotted } = renderDisturbancePanels(data);
    const uniqueEtaX = new Set(plotted.eta_x);
    expect(uniqueEtaX).toEqual(new Set([0.5, 0.2, 0.6]));
    expect(Math.min(...plotted.eta_y)).toBeGreaterThanOrEqual(0.05);
    expect(Math.max(...plotted.eta_y)).toBeLessThanOrEqual(1.0);
  });
});

describe("render CLI", () => {
  it("writes a scenario figure", () => {
    const out = join(mkdtempSync(join(tmpdir(), "fig-")), "s1.svg");
    const code = main(["render", "--preset", "s1",
                       "--csv", resolve(FIXTURES, "fast.csv"),
                       "--out", out]);
    expect(code).toBe(0);
    const svg = readFileSync(out, "utf8");
    expect(svg.startsWith("<svg")).toBe(true);
    expect(svg.match(/class="panel"/g)?.length).toBe(4);
  });

  it("writes the comparison figure", () => {
    const out = join(mkdtempSync(join(tmpdir(), "fig-")), "s12.svg");
    const code = main(["render", "--preset", "s12",
                       "--csv", resolve(FIXTURES, "fast.csv"),
                       "--csv2", resolve(FIXTURES, "slow.csv"),
                       "--out", out]);
    expect(code).toBe(0);
    expect(readFileSync(out, "utf8")).toContain("cumulative chemo");
  });
});
