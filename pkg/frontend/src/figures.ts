/**
 * Figure layouts over scenario CSVs.
 *
 * Three layouts: a four-panel scenario view (doses plus outputs against
 * their references and the rest-point levels), a four-panel cumulative-dose
 * comparison between two runs, and a two-panel delivery-fraction view.
 * Scenario panels clip to 30 days by default (everything has settled by
 * then); the disturbance view always covers the full horizon. Rendering is
 * read-only and plots CSV columns verbatim — no resampling.
 */

import {
  ScenarioData,
  clipColumns,
} from "./csv.js";
import {
  PANEL_SIZE,
  PanelSpec,
  renderPanel,
  svgDocument,
} from "./svg.js";

export const DEFAULT_HORIZON_DAYS = 30;

/** Rest-point levels drawn as horizontal rules (calibrated virtual patient). */
export interface EquilibriumLevels {
  benignX: number;
  benignY: number;
  malignantX: number;
  malignantY: number;
}

export const CALIBRATED_LEVELS: EquilibriumLevels = {
  benignX: 73.0,
  benignY: 1.32631,
  malignantX: 737.3,
  malignantY: 0.03152,
};

const CLOSED = { stroke: "#1f4fd8", width: 1.6 };
const NOMINAL = { stroke: "#111", dash: "5,4", width: 1.2 };
const BENIGN_RULE = { stroke: "#1a9641", dash: "7,3,1,3", width: 1.1 };
const MALIGNANT_RULE = { stroke: "#d7191c", dash: "7,3,1,3", width: 1.1 };

export interface RenderResult {
  svg: string;
  /** The exact numbers each panel plotted, for verification. */
  plotted: Record<string, number[]>;
}

function grid(panels: PanelSpec[], cols: number): string {
  const rendered = panels.map((p, i) =>
    renderPanel(p, (i % cols) * PANEL_SIZE.width,
                Math.floor(i / cols) * PANEL_SIZE.height));
  return svgDocument(rendered, cols, Math.ceil(panels.length / cols));
}

/** Four panels: chemo, immuno, tumor output, immune output. */
export function renderScenarioPanels(
  data: ScenarioData,
  options: {
    horizonDays?: number | null;
    levels?: EquilibriumLevels;
  } = {},
): RenderResult {
  const horizon = options.horizonDays === undefined
    ? DEFAULT_HORIZON_DAYS : options.horizonDays;
  const levels = options.levels ?? CALIBRATED_LEVELS;
  const d = clipColumns(data, horizon);
  const panels: PanelSpec[] = [
    {
      title: "(a) chemo dose",
      xLabel: "time (days)",
      yLabel: "u",
      series: [
        { label: "closed loop", x: d.t, y: d.u_cl, style: CLOSED },
        { label: "nominal", x: d.t, y: d.u_ol, style: NOMINAL },
      ],
    },
    {
      title: "(b) immuno dose",
      xLabel: "time (days)",
      yLabel: "v",
      series: [
        { label: "closed loop", x: d.t, y: d.v_cl, style: CLOSED },
        { label: "nominal", x: d.t, y: d.v_ol, style: NOMINAL },
      ],
    },
    {
      title: "(c) tumor burden",
      xLabel: "time (days)",
      yLabel: "x",
      series: [
        { label: "output", x: d.t, y: d.x, style: CLOSED },
        { label: "reference", x: d.t, y: d.x_ref, style: NOMINAL },
      ],
      rules: [
        { label: "benign", y: levels.benignX, style: BENIGN_RULE },
        { label: "malignant", y: levels.malignantX, style: MALIGNANT_RULE },
      ],
    },
    {
      title: "(d) immune density",
      xLabel: "time (days)",
      yLabel: "y",
      series: [
        { label: "output", x: d.t, y: d.y, style: CLOSED },
        { label: "reference", x: d.t, y: d.y_ref, style: NOMINAL },
      ],
      rules: [
        { label: "benign", y: levels.benignY, style: BENIGN_RULE },
        { label: "malignant", y: levels.malignantY, style: MALIGNANT_RULE },
      ],
    },
  ];
  return {
    svg: grid(panels, 2),
    plotted: {
      t: d.t, u_cl: d.u_cl, u_ol: d.u_ol, v_cl: d.v_cl, v_ol: d.v_ol,
      x: d.x, x_ref: d.x_ref, y: d.y, y_ref: d.y_ref,
    },
  };
}

export interface IntegralComparisonResult extends RenderResult {
  terminal: {
    firstIntU: number;
    firstIntV: number;
    secondIntU: number;
    secondIntV: number;
  };
}

/** Four panels of cumulative doses: first run on top, second below. */
export function renderIntegralComparison(
  first: ScenarioData,
  second: ScenarioData,
  options: { firstLabel?: string; secondLabel?: string } = {},
): IntegralComparisonResult {
  const a = options.firstLabel ?? "first";
  const b = options.secondLabel ?? "second";
  const mk = (title: string, d: ScenarioData, col: "int_u" | "int_v",
              yLabel: string): PanelSpec => ({
    title,
    xLabel: "time (days)",
    yLabel,
    series: [{ label: yLabel, x: d.t, y: d[col], style: CLOSED }],
  });
  const panels = [
    mk(`(a) cumulative chemo, ${a}`, first, "int_u", "int u_cl"),
    mk(`(b) cumulative immuno, ${a}`, first, "int_v", "int v_cl"),
    mk(`(c) cumulative chemo, ${b}`, second, "int_u", "int u_cl"),
    mk(`(d) cumulative immuno, ${b}`, second, "int_v", "int v_cl"),
  ];
  return {
    svg: grid(panels, 2),
    plotted: {
      t_first: first.t, int_u_first: first.int_u, int_v_first: first.int_v,
      t_second: second.t, int_u_second: second.int_u, int_v_second: second.int_v,
    },
    terminal: {
      firstIntU: first.int_u[first.int_u.length - 1],
      firstIntV: first.int_v[first.int_v.length - 1],
      secondIntU: second.int_u[second.int_u.length - 1],
      secondIntV: second.int_v[second.int_v.length - 1],
    },
  };
}

/** Two panels: the true delivery fractions over the full horizon. */
export function renderDisturbancePanels(data: ScenarioData): RenderResult {
  const panels: PanelSpec[] = [
    {
      title: "(a) chemo delivery fraction",
      xLabel: "time (days)",
      yLabel: "eta_x",
      series: [{ label: "eta_x", x: data.t, y: data.eta_x, style: CLOSED }],
    },
    {
      title: "(b) immuno delivery fraction",
      xLabel: "time (days)",
      yLabel: "eta_y",
      series: [{ label: "eta_y", x: data.t, y: data.eta_y, style: CLOSED }],
    },
  ];
  return {
    svg: grid(panels, 2),
    plotted: { t: data.t, eta_x: data.eta_x, eta_y: data.eta_y },
  };
}
