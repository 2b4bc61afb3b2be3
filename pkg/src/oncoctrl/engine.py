"""Fixed-step scenario simulation of the virtual patient under control.

Runs the true plant (RK4 at the sampling grid, zero-order hold on doses and
delivery fractions) while the planner and feedback layer only ever see the
assumed nominal delivery fractions. Supports uncontrolled, open-loop and
closed-loop operation, time-varying delivery-fraction profiles, a forced
immunotherapy-only mode, and full per-step recording.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace

import numpy as np

from oncoctrl.mfc import LoopHistory, MfcStepResult, UltraLocalConfig, mfc_step
from oncoctrl.patient import (
    PARAM_PRESETS,
    BasinLabel,
    EquilibriumSearchError,
    EquilibriumSet,
    PatientParams,
    PatientState,
    PositivityError,
    X_TOL,
    Y_TOL,
    classify_basin,
    find_equilibria,
    rk4_step_xy,
)
from oncoctrl.planner import (
    OpenLoopSchedule,
    ReferenceTrajectory,
    flat_inverse,
    plan_reference,
    reference_sample,
    schedule_from_reference,
)

log = logging.getLogger(__name__)

CONTROLLER_MODES = ("none", "open-loop", "closed-loop")

# Steady-state verdict: max-norm state change over the final window.
STEADY_STATE_WINDOW_DAYS = 10.0
STEADY_STATE_TOL = 1e-3

CSV_COLUMNS = ("t", "x", "y", "x_ref", "y_ref", "u_ol", "v_ol", "u_mfc",
               "v_mfc", "u_cl", "v_cl", "eta_x", "eta_y", "fx_est", "fy_est",
               "int_u", "int_v")


class DisturbanceProfile(ABC):
    """Time profile of a delivery fraction, always evaluated into [0, 1]."""

    kind: str

    @abstractmethod
    def raw_value(self, t: float) -> float:
        """Profile value before the [0, 1] feasibility clamp."""

    def value(self, t: float) -> float:
        v = self.raw_value(t)
        if v < 0.0 or v > 1.0:
            if not getattr(self, "_clamp_warned", False):
                object.__setattr__(self, "_clamp_warned", True)
                log.warning("%s profile leaves [0, 1] (%.4f at t=%.3f); clamping",
                            self.kind, v, t)
            v = min(max(v, 0.0), 1.0)
        return v


@dataclass(frozen=True)
class ConstantProfile(DisturbanceProfile):
    level: float
    kind: str = field(default="constant", init=False)

    def raw_value(self, t: float) -> float:
        return self.level


@dataclass(frozen=True)
class PiecewiseConstantProfile(DisturbanceProfile):
    """Levels held from their switch times onward; times must start at 0."""

    times: tuple[float, ...]
    levels: tuple[float, ...]
    kind: str = field(default="piecewise", init=False)

    def __post_init__(self) -> None:
        if len(self.times) != len(self.levels) or not self.times:
            raise ValueError("times and levels must be nonempty and equal length")
        if self.times[0] != 0.0 or any(a >= b for a, b in zip(self.times, self.times[1:])):
            raise ValueError("switch times must start at 0 and increase strictly")

    def raw_value(self, t: float) -> float:
        v = self.levels[0]
        for ti, li in zip(self.times, self.levels):
            if t >= ti:
                v = li
            else:
                break
        return v


@dataclass(frozen=True)
class SinusoidProfile(DisturbanceProfile):
    mean: float
    amplitude: float
    period: float
    phase: float = 0.0
    clamp_lo: float = 0.0
    clamp_hi: float = 1.0
    kind: str = field(default="sinusoid", init=False)

    def __post_init__(self) -> None:
        if not self.period > 0.0:
            raise ValueError("period must be positive")
        if not 0.0 <= self.clamp_lo < self.clamp_hi <= 1.0:
            raise ValueError("clamp band must satisfy 0 <= lo < hi <= 1")

    def raw_value(self, t: float) -> float:
        v = self.mean + self.amplitude * math.sin(2.0 * math.pi * t / self.period
                                                  + self.phase)
        return min(max(v, self.clamp_lo), self.clamp_hi)


@dataclass(frozen=True)
class SampledSeriesProfile(DisturbanceProfile):
    """Explicit time series, zero-order-held between sample times."""

    times: tuple[float, ...]
    values: tuple[float, ...]
    kind: str = field(default="series", init=False)

    def __post_init__(self) -> None:
        if len(self.times) != len(self.values) or not self.times:
            raise ValueError("times and values must be nonempty and equal length")
        if any(a >= b for a, b in zip(self.times, self.times[1:])):
            raise ValueError("sample times must increase strictly")

    def raw_value(self, t: float) -> float:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.values[max(idx, 0)]


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a run needs; hashable content via config.serialize_config."""

    params_preset: str = "equilibria-calibrated"
    initial: PatientState = PatientState(500.0, 0.5)
    duration: float = 60.0
    dt: float = 1.0 / 48.0
    controller_mode: str = "closed-loop"
    goal: PatientState | None = None     # None = benign equilibrium
    ramp_time: float = 5.0
    ulm: UltraLocalConfig = UltraLocalConfig()
    eta_x_true: DisturbanceProfile = ConstantProfile(0.5)
    eta_y_true: DisturbanceProfile = ConstantProfile(0.5)
    eta_x_assumed: float | None = None   # None = preset nominal
    eta_y_assumed: float | None = None
    force_zero_u: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.params_preset not in PARAM_PRESETS:
            raise ValueError(f"unknown parameter preset {self.params_preset!r}")
        if self.controller_mode not in CONTROLLER_MODES:
            raise ValueError(f"controller_mode must be one of {CONTROLLER_MODES}")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        n = self.duration / self.dt
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ValueError("duration must be a positive integer number of dt steps")
        if self.controller_mode == "closed-loop":
            self.ulm.validate_against_dt(self.dt)

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def params(self) -> PatientParams:
        return PARAM_PRESETS[self.params_preset]


@dataclass(frozen=True)
class ScenarioSummary:
    final_state: PatientState
    distances: tuple[float, float, float] | None   # max-norm to benign/saddle/malignant
    basin: str
    total_u: float
    total_v: float
    steady_state_change: float
    steady_state_ok: bool
    in_benign_ball: bool


@dataclass
class SimulationRecord:
    """Per-step columns (CSV_COLUMNS order) plus the terminal summary."""

    config: ScenarioConfig
    columns: dict[str, np.ndarray]
    summary: ScenarioSummary
    equilibria: EquilibriumSet | None
    reference: ReferenceTrajectory | None
    schedule: OpenLoopSchedule | None

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]

    @property
    def n_rows(self) -> int:
        return len(self.columns["t"])


class SimulationAbort(RuntimeError):
    """Integration failed; carries the partial record for post-mortem."""

    def __init__(self, message: str, step: int, partial: SimulationRecord) -> None:
        super().__init__(message)
        self.step = step
        self.partial = partial


def integrate_step(state: PatientState, u: float, v: float, eta_x: float,
                   eta_y: float, p: PatientParams, dt: float) -> PatientState:
    """One RK4 step with doses and delivery fractions held constant."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    x, y = rk4_step_xy(state.x, state.y, u, v, eta_x, eta_y, p, dt)
    return PatientState(x, y)


def _summarize(cfg: ScenarioConfig, cols: dict[str, np.ndarray],
               eq: EquilibriumSet | None, p: PatientParams) -> ScenarioSummary:
    x = cols["x"]
    y = cols["y"]
    final = PatientState(float(x[-1]), float(y[-1]))
    distances = None
    basin = BasinLabel.UNDETERMINED.value
    in_ball = False
    if eq is not None:
        distances = tuple(
            max(abs(final.x - s.x), abs(final.y - s.y)) for s in eq.states)
        basin = classify_basin(final, p, horizon=200.0, dt=cfg.dt).value
        in_ball = (abs(final.x - eq.benign.x) <= X_TOL
                   and abs(final.y - eq.benign.y) <= Y_TOL)
    window = max(1, int(round(STEADY_STATE_WINDOW_DAYS / cfg.dt)))
    window = min(window, len(x) - 1)
    dxw = np.abs(x[-window - 1:] - x[-1])
    dyw = np.abs(y[-window - 1:] - y[-1])
    ss_change = float(max(dxw.max(), dyw.max()))
    return ScenarioSummary(
        final_state=final,
        distances=distances,
        basin=basin,
        total_u=float(cols["int_u"][-1]),
        total_v=float(cols["int_v"][-1]),
        steady_state_change=ss_change,
        steady_state_ok=ss_change < STEADY_STATE_TOL,
        in_benign_ball=in_ball,
    )


def run_scenario(cfg: ScenarioConfig) -> SimulationRecord:
    """Simulate one scenario and record every step.

    The plan is built against the assumed delivery fractions; the plant
    integrates with the true (possibly time-varying) ones. force_zero_u
    zeroes the chemo channel after composition and keeps it out of the
    dose integral, while the x-channel estimator keeps running for
    diagnostics. Deterministic: identical configs produce bit-identical
    records.
    """
    p = cfg.params()
    n = cfg.n_steps
    dt = cfg.dt

    try:
        eq = find_equilibria(p)
    except EquilibriumSearchError:
        eq = None

    reference = None
    schedule = None
    goal = None
    eta_xa = eta_ya = 0.0
    if cfg.controller_mode != "none":
        goal = cfg.goal
        if goal is None:
            if eq is None:
                raise ValueError(
                    "no explicit goal and the preset has no benign equilibrium")
            goal = eq.benign
        reference = plan_reference(cfg.initial, goal, cfg.duration,
                                   cfg.ramp_time, dt)
        eta_xa = p.eta_x_nom if cfg.eta_x_assumed is None else cfg.eta_x_assumed
        eta_ya = p.eta_y_nom if cfg.eta_y_assumed is None else cfg.eta_y_assumed
        schedule = schedule_from_reference(reference, p, eta_xa, eta_ya)

    cols = {name: np.zeros(n + 1) for name in CSV_COLUMNS}
    closed = cfg.controller_mode == "closed-loop"
    if closed:
        hist_x = LoopHistory(dt, int(round(cfg.ulm.tau_x / dt)) + 1)
        hist_y = LoopHistory(dt, int(round(cfg.ulm.tau_y / dt)) + 1)

    x, y = cfg.initial.x, cfg.initial.y
    for k in range(n + 1):
        t = k * dt
        ex = cfg.eta_x_true.value(t)
        ey = cfg.eta_y_true.value(t)

        if cfg.controller_mode == "none":
            xr = yr = math.nan
            u_ol = v_ol = 0.0
            step = MfcStepResult(0.0, 0.0, math.nan, math.nan, 0.0, 0.0, 0.0, 0.0)
            u_cl = v_cl = 0.0
        else:
            xr = float(reference.x_ref[k])
            yr = float(reference.y_ref[k])
            # Hold the nominal evaluated at the interval midpoint: one
            # constant dose per step, but without the O(dt) tracking drift
            # of left-endpoint sampling.
            tm = min(t + 0.5 * dt, cfg.duration)
            xm, dxm, ym, dym = reference_sample(cfg.initial, goal,
                                                cfg.ramp_time, tm)
            u_raw, v_raw = flat_inverse(xm, dxm, ym, dym, p, eta_xa, eta_ya)
            u_ol = max(u_raw, 0.0)
            v_ol = max(v_raw, 0.0)
            if closed:
                step = mfc_step(t, PatientState(x, y), xr, yr, u_ol, v_ol,
                                cfg.ulm, hist_x, hist_y)
                u_cl, v_cl = step.u_cl, step.v_cl
            else:
                step = MfcStepResult(u_ol, v_ol, x - xr, y - yr,
                                     0.0, 0.0, 0.0, 0.0)
                u_cl, v_cl = u_ol, v_ol
        if cfg.force_zero_u:
            u_cl = 0.0
        if not (u_cl >= 0.0 and v_cl >= 0.0):
            raise AssertionError("closed-loop doses must be nonnegative")

        cols["t"][k] = t
        cols["x"][k] = x
        cols["y"][k] = y
        cols["x_ref"][k] = xr
        cols["y_ref"][k] = yr
        cols["u_ol"][k] = u_ol
        cols["v_ol"][k] = v_ol
        cols["u_mfc"][k] = step.u_mfc
        cols["v_mfc"][k] = step.v_mfc
        cols["u_cl"][k] = u_cl
        cols["v_cl"][k] = v_cl
        cols["eta_x"][k] = ex
        cols["eta_y"][k] = ey
        cols["fx_est"][k] = step.fx_est
        cols["fy_est"][k] = step.fy_est
        if k > 0:
            cols["int_u"][k] = cols["int_u"][k - 1] + dt * 0.5 * (
                cols["u_cl"][k - 1] + u_cl)
            cols["int_v"][k] = cols["int_v"][k - 1] + dt * 0.5 * (
                cols["v_cl"][k - 1] + v_cl)

        if k == n:
            break
        try:
            x, y = rk4_step_xy(x, y, u_cl, v_cl, ex, ey, p, dt)
        except PositivityError as err:
            partial_cols = {name: arr[:k + 1].copy() for name, arr in cols.items()}
            partial = SimulationRecord(
                config=cfg, columns=partial_cols,
                summary=_summarize(cfg, partial_cols, eq, p),
                equilibria=eq, reference=reference, schedule=schedule)
            raise SimulationAbort(
                f"integration aborted at step {k} (t={t:.4f}): {err}",
                step=k, partial=partial) from err

    return SimulationRecord(
        config=cfg, columns=cols, summary=_summarize(cfg, cols, eq, p),
        equilibria=eq, reference=reference, schedule=schedule)


@dataclass(frozen=True)
class RecordComparison:
    total_u_delta: float       # a - b
    total_v_delta: float
    max_err_x: tuple[float, float]
    max_err_y: tuple[float, float]
    terminal_err_x: tuple[float, float]
    terminal_err_y: tuple[float, float]
    basins: tuple[str, str]


def compare_records(a: SimulationRecord, b: SimulationRecord) -> RecordComparison:
    """Side-by-side dose, tracking-error and basin comparison."""
    ta, tb = a.columns["t"], b.columns["t"]
    if len(ta) != len(tb) or not np.array_equal(ta, tb):
        raise ValueError("records must share the same time grid")

    def _errs(r: SimulationRecord) -> tuple[float, float, float, float]:
        ex = r.columns["x"] - r.columns["x_ref"]
        ey = r.columns["y"] - r.columns["y_ref"]
        if np.all(np.isnan(ex)):
            return math.nan, math.nan, math.nan, math.nan
        return (float(np.nanmax(np.abs(ex))), float(np.nanmax(np.abs(ey))),
                float(abs(ex[-1])), float(abs(ey[-1])))

    mxa, mya, txa, tya = _errs(a)
    mxb, myb, txb, tyb = _errs(b)
    return RecordComparison(
        total_u_delta=a.summary.total_u - b.summary.total_u,
        total_v_delta=a.summary.total_v - b.summary.total_v,
        max_err_x=(mxa, mxb),
        max_err_y=(mya, myb),
        terminal_err_x=(txa, txb),
        terminal_err_y=(tya, tyb),
        basins=(a.summary.basin, b.summary.basin),
    )


# Scenario presets. All run the calibrated patient for 60 days at 30-minute
# sampling from initial states inside the malignant basin. The very-sick
# pair uses stand-in delivery-fraction fluctuation profiles: chemo delivery
# stepping 0.5 -> 0.2 -> 0.6 at days 10 and 20, immuno delivery swinging
# sinusoidally with a 3-day period, clamped to [0.05, 1].
_VERY_SICK_ETA_X = PiecewiseConstantProfile(times=(0.0, 10.0, 20.0),
                                            levels=(0.5, 0.2, 0.6))
_VERY_SICK_ETA_Y = SinusoidProfile(mean=0.5, amplitude=0.35, period=3.0,
                                   clamp_lo=0.05, clamp_hi=1.0)

SCENARIO_PRESETS: dict[str, ScenarioConfig] = {
    "fast": ScenarioConfig(ramp_time=5.0),
    "slow": ScenarioConfig(ramp_time=20.0),
    "mismatch": ScenarioConfig(
        ramp_time=5.0,
        eta_x_true=ConstantProfile(0.31),
        eta_y_true=ConstantProfile(0.75),
    ),
    "very-sick": ScenarioConfig(
        initial=PatientState(770.0, 0.1),
        ramp_time=20.0,
        eta_x_true=_VERY_SICK_ETA_X,
        eta_y_true=_VERY_SICK_ETA_Y,
        force_zero_u=True,
    ),
    "very-sick-open-loop": ScenarioConfig(
        initial=PatientState(770.0, 0.1),
        ramp_time=20.0,
        controller_mode="open-loop",
        eta_x_true=_VERY_SICK_ETA_X,
        eta_y_true=_VERY_SICK_ETA_Y,
        force_zero_u=True,
    ),
    "uncontrolled": ScenarioConfig(controller_mode="none"),
}


def scenario_preset(name: str) -> ScenarioConfig:
    if name not in SCENARIO_PRESETS:
        raise KeyError(f"unknown scenario preset {name!r}; "
                       f"available: {', '.join(sorted(SCENARIO_PRESETS))}")
    return SCENARIO_PRESETS[name]


def open_loop_variant(cfg: ScenarioConfig) -> ScenarioConfig:
    """Same scenario with the feedback layer removed."""
    return replace(cfg, controller_mode="open-loop")
