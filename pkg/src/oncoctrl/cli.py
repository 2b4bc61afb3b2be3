"""Command-line front end: scenario presets, runs, sweeps, equilibria.

Subcommands:
    list-presets                        built-in scenarios
    run --preset NAME | --config FILE   simulate, write CSV + summary + manifest
    sweep --preset NAME --ramp LIST     shooting sweep over ramp times
    equilibria --preset PARAMS          print the three equilibria

Exit codes: 0 success, 1 argument/config failure, 2 simulation abort.
Errors also go to stderr as one JSON line. `ONCO_OUT_DIR` sets the default
output root (default ./runs). Outputs are deterministic: two runs of the
same config produce byte-identical CSVs; timestamps live only in the
manifest.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass

import oncoctrl
from oncoctrl.config import (
    ConfigError,
    config_hash,
    parse_config_file,
    serialize_config,
)
from oncoctrl.engine import (
    CSV_COLUMNS,
    SCENARIO_PRESETS,
    ScenarioConfig,
    SimulationAbort,
    SimulationRecord,
    run_scenario,
    scenario_preset,
)
from oncoctrl.patient import (
    PARAM_PRESETS,
    EquilibriumSearchError,
    find_equilibria,
)
from oncoctrl.planner import ShootingCriteria, shoot


@dataclass(frozen=True)
class RunManifest:
    scenario: str
    config_hash: str
    outputs: dict[str, str]
    toolkit_version: str
    wall_clock_seconds: float
    status: str
    aborted_step: int | None = None

    def to_json(self) -> str:
        payload = {
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "outputs": self.outputs,
            "toolkit_version": self.toolkit_version,
            "wall_clock_seconds": self.wall_clock_seconds,
            "status": self.status,
        }
        if self.aborted_step is not None:
            payload["aborted_step"] = self.aborted_step
        return json.dumps(payload, indent=2) + "\n"


def _err(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def format_float(v: float) -> str:
    """17 significant digits: round-trips float64 exactly."""
    return format(v, ".17g")


def write_csv(record: SimulationRecord, path: str) -> None:
    cols = [record.columns[name] for name in CSV_COLUMNS]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for i in range(record.n_rows):
            fh.write(",".join(format_float(float(c[i])) for c in cols) + "\n")


def summary_text(record: SimulationRecord, scenario: str,
                 status: str = "completed") -> str:
    s = record.summary
    lines = [
        f"scenario: {scenario}",
        f"status: {status}",
        f"config hash: {config_hash(record.config)}",
        f"params preset: {record.config.params_preset}",
        f"controller: {record.config.controller_mode}",
        f"rows: {record.n_rows}",
        f"final state: x = {format_float(s.final_state.x)}, "
        f"y = {format_float(s.final_state.y)}",
    ]
    if record.equilibria is not None and s.distances is not None:
        for name, st, d in zip(("benign", "saddle", "malignant"),
                               record.equilibria.states, s.distances):
            lines.append(f"distance to {name} ({st.x:.4f}, {st.y:.4f}), "
                         f"max-norm: {format_float(d)}")
    lines += [
        f"within benign ball (+-1.0 in x, +-0.05 in y): "
        f"{'yes' if s.in_benign_ball else 'no'}",
        f"basin of final state (uncontrolled, 200 d): {s.basin}",
        f"total chemo dose (trapezoid of u_cl): {format_float(s.total_u)}",
        f"total immuno dose (trapezoid of v_cl): {format_float(s.total_v)}",
        f"steady-state change over final 10 days: "
        f"{format_float(s.steady_state_change)} "
        f"({'pass' if s.steady_state_ok else 'fail'}, tolerance 0.001)",
    ]
    return "\n".join(lines) + "\n"


def _default_out_root() -> str:
    return os.environ.get("ONCO_OUT_DIR", "runs")


def _write_run_outputs(record: SimulationRecord, scenario: str, out_dir: str,
                       status: str, wall: float,
                       aborted_step: int | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "steps.csv")
    summary_path = os.path.join(out_dir, "summary.txt")
    config_path = os.path.join(out_dir, "config.txt")
    manifest_path = os.path.join(out_dir, "manifest.json")
    write_csv(record, csv_path)
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(summary_text(record, scenario, status))
    with open(config_path, "w", encoding="utf-8") as fh:
        fh.write(serialize_config(record.config))
    manifest = RunManifest(
        scenario=scenario,
        config_hash=config_hash(record.config),
        outputs={"csv": csv_path, "summary": summary_path, "config": config_path},
        toolkit_version=oncoctrl.__version__,
        wall_clock_seconds=wall,
        status=status,
        aborted_step=aborted_step,
    )
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json())


def cmd_list_presets(_args: argparse.Namespace) -> int:
    for name in sorted(SCENARIO_PRESETS):
        cfg = SCENARIO_PRESETS[name]
        print(f"{name:22s} initial=({cfg.initial.x:g}, {cfg.initial.y:g}) "
              f"controller={cfg.controller_mode} ramp={cfg.ramp_time:g}d"
              + (" u_cl=0" if cfg.force_zero_u else ""))
    return 0


def _load_config(args: argparse.Namespace) -> tuple[ScenarioConfig, str]:
    if args.preset is not None:
        if args.preset not in SCENARIO_PRESETS:
            raise ConfigError(f"unknown scenario preset {args.preset!r}; "
                              f"see list-presets")
        return scenario_preset(args.preset), args.preset
    cfg = parse_config_file(args.config)
    name = os.path.splitext(os.path.basename(args.config))[0]
    return cfg, name


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg, scenario = _load_config(args)
    except ConfigError as err:
        _err("config-parse", str(err))
        return 1
    out_dir = args.out or os.path.join(_default_out_root(), scenario)
    t0 = time.perf_counter()
    try:
        record = run_scenario(cfg)
    except SimulationAbort as abort:
        wall = time.perf_counter() - t0
        _write_run_outputs(abort.partial, scenario, out_dir, "aborted", wall,
                           aborted_step=abort.step)
        _err("simulation-abort", str(abort))
        print(f"aborted: partial record ({abort.partial.n_rows} rows) "
              f"written to {out_dir}")
        return 2
    wall = time.perf_counter() - t0
    _write_run_outputs(record, scenario, out_dir, "completed", wall)
    s = record.summary
    print(f"{scenario}: {record.n_rows} rows -> {out_dir}")
    print(f"final state ({s.final_state.x:.4f}, {s.final_state.y:.4f}), "
          f"basin {s.basin}, total doses u={s.total_u:.4f} v={s.total_v:.4f}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        cfg, scenario = _load_config(args)
        ramps = [float(r) for r in args.ramp.split(",") if r.strip()]
        if not ramps:
            raise ConfigError("--ramp needs a comma-separated list of days")
    except (ConfigError, ValueError) as err:
        _err("config-parse", str(err))
        return 1
    p = cfg.params()
    goal = cfg.goal
    if goal is None:
        try:
            goal = find_equilibria(p).benign
        except EquilibriumSearchError as err:
            _err("config-parse", f"preset has no benign equilibrium: {err}")
            return 1
    criteria = ShootingCriteria(
        max_total_u=args.max_total_u, max_total_v=args.max_total_v,
        max_peak_u=args.max_peak_u, max_peak_v=args.max_peak_v,
        require_benign_arrival=args.require_arrival)
    eta_xa = p.eta_x_nom if cfg.eta_x_assumed is None else cfg.eta_x_assumed
    eta_ya = p.eta_y_nom if cfg.eta_y_assumed is None else cfg.eta_y_assumed
    result = shoot(cfg.initial, goal, ramps, criteria, p, cfg.dt, cfg.duration,
                   eta_x=eta_xa, eta_y=eta_ya)

    out_dir = args.out or os.path.join(_default_out_root(), f"sweep-{scenario}")
    os.makedirs(out_dir, exist_ok=True)
    table_path = os.path.join(out_dir, "ranking.csv")
    with open(table_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("rank,ramp_days,total_u,total_v,peak_u,peak_v\n")
        for i, c in enumerate(result.ranked, start=1):
            fh.write(f"{i},{format_float(c.ramp_time)},{format_float(c.total_u)},"
                     f"{format_float(c.total_v)},{format_float(float(c.schedule.u_ol.max()))},"
                     f"{format_float(float(c.schedule.v_ol.max()))}\n")
    print(f"ranking ({len(result.ranked)} candidates) -> {table_path}")
    for i, c in enumerate(result.ranked, start=1):
        print(f"  {i}. ramp={c.ramp_time:g}d total_u={c.total_u:.6f} "
              f"total_v={c.total_v:.6f}")
    for ramp, reason in result.rejected:
        print(f"  rejected ramp={ramp:g}d: {reason}")
    return 0


def cmd_equilibria(args: argparse.Namespace) -> int:
    if args.preset not in PARAM_PRESETS:
        _err("config-parse", f"unknown parameter preset {args.preset!r}; "
             f"available: {', '.join(sorted(PARAM_PRESETS))}")
        return 1
    try:
        eq = find_equilibria(PARAM_PRESETS[args.preset])
    except EquilibriumSearchError as err:
        _err("equilibria", str(err))
        return 2
    for name, st, res, lab, ev in zip(("benign", "saddle", "malignant"),
                                      eq.states, eq.residuals, eq.labels,
                                      eq.eigenvalues):
        print(f"{name:10s} x = {st.x:.4f}  y = {st.y:.5f}  residual = {res:.2e}  "
              f"{lab}  eigenvalues = {ev[0]:.4f}, {ev[1]:.4f}")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 on usage errors, not 2
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oncoctrl",
                     description="In-silico chemo/immunotherapy scheduling toolkit")
    parser.add_argument("--version", action="version",
                        version=f"oncoctrl {oncoctrl.__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list-presets", help="list built-in scenario presets")

    run_p = sub.add_parser("run", help="simulate one scenario")
    src = run_p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="built-in scenario name")
    src.add_argument("--config", help="scenario config file")
    run_p.add_argument("--out", help="output directory "
                       "(default $ONCO_OUT_DIR/<scenario>)")

    sweep_p = sub.add_parser("sweep", help="shooting sweep over ramp times")
    src = sweep_p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="built-in scenario name")
    src.add_argument("--config", help="scenario config file")
    sweep_p.add_argument("--ramp", required=True,
                         help="comma-separated ramp times in days")
    sweep_p.add_argument("--out", help="output directory")
    sweep_p.add_argument("--max-total-u", type=float, dest="max_total_u")
    sweep_p.add_argument("--max-total-v", type=float, dest="max_total_v")
    sweep_p.add_argument("--max-peak-u", type=float, dest="max_peak_u")
    sweep_p.add_argument("--max-peak-v", type=float, dest="max_peak_v")
    sweep_p.add_argument("--require-arrival", action="store_true",
                         dest="require_arrival",
                         help="drop candidates whose nominal rollout misses the goal")

    eq_p = sub.add_parser("equilibria", help="print the three equilibria")
    eq_p.add_argument("--preset", required=True, help="parameter preset name")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as err:
        _err("usage", str(err))
        return 1
    handlers = {
        "list-presets": cmd_list_presets,
        "run": cmd_run,
        "sweep": cmd_sweep,
        "equilibria": cmd_equilibria,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
