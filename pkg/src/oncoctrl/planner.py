"""Reference trajectories and nominal open-loop dose schedules.

Because the tumor/immune model is differentially flat with (x, y) as flat
outputs, the dose rates follow algebraically from any smooth reference
(x*, y*) and its first derivatives. This module generates quintic
ramp-and-hold references, inverts them into nominal controls, clips
negative demands to zero, and ranks candidate ramp times shooting-style
by total injected dose.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from oncoctrl.patient import PatientParams, PatientState, X_TOL, Y_TOL, rk4_step_xy


def _trapz(y: np.ndarray, dx: float) -> float:
    """Trapezoidal integral on a uniform grid."""
    if len(y) < 2:
        return 0.0
    return float(dx * (0.5 * (y[0] + y[-1]) + y[1:-1].sum()))


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Sampled flat-output plan: ramp to the goal, then hold it."""

    t: np.ndarray
    x_ref: np.ndarray
    y_ref: np.ndarray
    dx_ref: np.ndarray
    dy_ref: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.t)
        for name in ("x_ref", "y_ref", "dx_ref", "dy_ref"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length does not match the time grid")
        if not (np.all(self.x_ref > 0.0) and np.all(self.y_ref > 0.0)):
            raise ValueError("reference outputs must stay strictly positive")

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class OpenLoopSchedule:
    """Unclipped nominal controls and their nonnegative clipped versions."""

    u_star: np.ndarray
    v_star: np.ndarray
    u_ol: np.ndarray
    v_ol: np.ndarray

    @property
    def fully_clipped_u(self) -> bool:
        return bool(np.all(self.u_star < 0.0))

    @property
    def fully_clipped_v(self) -> bool:
        return bool(np.all(self.v_star < 0.0))


@dataclass(frozen=True)
class ShootingCriteria:
    """Dose budgets and caps a candidate plan must respect (None = unset)."""

    max_total_u: float | None = None
    max_total_v: float | None = None
    max_peak_u: float | None = None
    max_peak_v: float | None = None
    require_benign_arrival: bool = False

    def __post_init__(self) -> None:
        for name in ("max_total_u", "max_total_v", "max_peak_u", "max_peak_v"):
            v = getattr(self, name)
            if v is not None and v < 0.0:
                raise ValueError(f"{name} must be nonnegative or None")


@dataclass(frozen=True)
class ShootingCandidate:
    ramp_time: float
    reference: ReferenceTrajectory
    schedule: OpenLoopSchedule
    total_u: float
    total_v: float


@dataclass(frozen=True)
class ShootingResult:
    ranked: list[ShootingCandidate]
    rejected: list[tuple[float, str]] = field(default_factory=list)


def _quintic(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Smoothstep s(p) = 6p^5 - 15p^4 + 10p^3 and ds/dp on p in [0, 1].

    Zero first and second derivative at both ends, so the inverted controls
    carry no spike at the ramp/hold junction.
    """
    s = ((6.0 * p - 15.0) * p + 10.0) * p * p * p
    ds = 30.0 * p * p * (1.0 - p) * (1.0 - p)
    return s, ds


def reference_sample(start: PatientState, goal: PatientState, ramp_time: float,
                     t: float) -> tuple[float, float, float, float]:
    """Closed-form reference point (x*, dx*, y*, dy*) at an arbitrary time."""
    if not ramp_time > 0.0:
        raise ValueError("ramp_time must be positive")
    if t >= ramp_time:
        s, ds = 1.0, 0.0
    else:
        p = max(t, 0.0) / ramp_time
        s = ((6.0 * p - 15.0) * p + 10.0) * p * p * p
        ds = 30.0 * p * p * (1.0 - p) * (1.0 - p) / ramp_time
    return (start.x + (goal.x - start.x) * s,
            (goal.x - start.x) * ds,
            start.y + (goal.y - start.y) * s,
            (goal.y - start.y) * ds)


def plan_reference(start: PatientState, goal: PatientState, duration: float,
                   ramp_time: float, dt: float) -> ReferenceTrajectory:
    """Quintic ramp from start to goal over [0, ramp_time], then hold.

    Derivative samples are the analytic quintic derivatives (identically
    zero on the hold segment), so inverting and re-applying the dynamics
    reproduces them to floating-point accuracy.
    """
    if not ramp_time > 0.0:
        raise ValueError("ramp_time must be positive")
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    if ramp_time > duration:
        raise ValueError("ramp_time must not exceed duration")
    n = int(round(duration / dt))
    if abs(n * dt - duration) > 1e-9 * max(1.0, duration):
        raise ValueError("duration must be an integer number of dt steps")

    t = np.arange(n + 1) * dt
    p = np.clip(t / ramp_time, 0.0, 1.0)
    s, ds = _quintic(p)
    on_ramp = t < ramp_time
    ds = np.where(on_ramp, ds / ramp_time, 0.0)
    # s(1) evaluates to exactly 1.0, so held samples match the goal exactly.
    x_ref = start.x + (goal.x - start.x) * s
    y_ref = start.y + (goal.y - start.y) * s
    dx_ref = (goal.x - start.x) * ds
    dy_ref = (goal.y - start.y) * ds
    return ReferenceTrajectory(t=t, x_ref=x_ref, y_ref=y_ref,
                               dx_ref=dx_ref, dy_ref=dy_ref)


def flat_inverse(x, dx, y, dy, p: PatientParams, eta_x: float, eta_y: float):
    """Nominal dose rates (u*, v*) realizing the demanded derivatives.

    Algebraic inverse of the dynamics; accepts scalars or arrays. The
    outputs may be negative — clip_schedule handles that.
    """
    if not (eta_x > 0.0 and eta_y > 0.0):
        raise ValueError("delivery fractions must be strictly positive to invert")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ValueError("flat inversion needs x > 0 and y > 0")
    u_star = -(dx + p.mu_c * x * np.log(x / p.x_inf) + p.gamma * x * y) / (x * eta_x)
    v_star = (dy - p.mu_i * (x - p.beta * x * x) * y + p.delta * y - p.alpha) / (y * eta_y)
    if u_star.ndim == 0:
        return float(u_star), float(v_star)
    return u_star, v_star


def clip_schedule(u_star: np.ndarray, v_star: np.ndarray) -> OpenLoopSchedule:
    """Samplewise nonnegative clipping of the nominal controls."""
    u_star = np.asarray(u_star, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    if u_star.shape != v_star.shape:
        raise ValueError("u_star and v_star must have the same length")
    return OpenLoopSchedule(
        u_star=u_star,
        v_star=v_star,
        u_ol=np.maximum(u_star, 0.0),
        v_ol=np.maximum(v_star, 0.0),
    )


def schedule_from_reference(ref: ReferenceTrajectory, p: PatientParams,
                            eta_x: float, eta_y: float) -> OpenLoopSchedule:
    """Invert a reference into its clipped open-loop dose schedule."""
    u_star, v_star = flat_inverse(ref.x_ref, ref.dx_ref, ref.y_ref, ref.dy_ref,
                                  p, eta_x, eta_y)
    return clip_schedule(u_star, v_star)


def _nominal_endpoint(ref: ReferenceTrajectory, sched: OpenLoopSchedule,
                      p: PatientParams, eta_x: float, eta_y: float,
                      dt: float) -> tuple[float, float]:
    """Roll the plant forward under the clipped schedule at nominal eta."""
    x, y = float(ref.x_ref[0]), float(ref.y_ref[0])
    for k in range(len(ref) - 1):
        x, y = rk4_step_xy(x, y, float(sched.u_ol[k]), float(sched.v_ol[k]),
                           eta_x, eta_y, p, dt)
    return x, y


def shoot(start: PatientState, goal: PatientState, ramp_candidates: list[float],
          criteria: ShootingCriteria, p: PatientParams, dt: float,
          duration: float,
          eta_x: float | None = None, eta_y: float | None = None) -> ShootingResult:
    """Plan/invert/clip each candidate ramp time and rank the survivors.

    Candidates violating the criteria are dropped with a reason; survivors
    are sorted by (total_u, total_v) ascending — chemo minimized first.
    """
    if not ramp_candidates:
        raise ValueError("ramp_candidates must be nonempty")
    eta_x = p.eta_x_nom if eta_x is None else eta_x
    eta_y = p.eta_y_nom if eta_y is None else eta_y

    survivors: list[ShootingCandidate] = []
    rejected: list[tuple[float, str]] = []
    for ramp in ramp_candidates:
        ref = plan_reference(start, goal, duration, ramp, dt)
        sched = schedule_from_reference(ref, p, eta_x, eta_y)
        total_u = _trapz(sched.u_ol, dt)
        total_v = _trapz(sched.v_ol, dt)
        reason = None
        if criteria.max_total_u is not None and total_u > criteria.max_total_u:
            reason = f"total chemo {total_u:.4g} exceeds budget {criteria.max_total_u:.4g}"
        elif criteria.max_total_v is not None and total_v > criteria.max_total_v:
            reason = f"total immuno {total_v:.4g} exceeds budget {criteria.max_total_v:.4g}"
        elif criteria.max_peak_u is not None and sched.u_ol.max() > criteria.max_peak_u:
            reason = f"peak chemo {sched.u_ol.max():.4g} exceeds cap {criteria.max_peak_u:.4g}"
        elif criteria.max_peak_v is not None and sched.v_ol.max() > criteria.max_peak_v:
            reason = f"peak immuno {sched.v_ol.max():.4g} exceeds cap {criteria.max_peak_v:.4g}"
        elif criteria.require_benign_arrival:
            xe, ye = _nominal_endpoint(ref, sched, p, eta_x, eta_y, dt)
            if not (abs(xe - goal.x) <= X_TOL and abs(ye - goal.y) <= Y_TOL):
                reason = (f"nominal rollout ends at ({xe:.3f}, {ye:.4f}), "
                          f"outside the arrival ball around ({goal.x:.3f}, {goal.y:.4f})")
        if reason is None:
            survivors.append(ShootingCandidate(
                ramp_time=ramp, reference=ref, schedule=sched,
                total_u=total_u, total_v=total_v))
        else:
            rejected.append((ramp, reason))
    survivors.sort(key=lambda c: (c.total_u, c.total_v))
    return ShootingResult(ranked=survivors, rejected=rejected)
