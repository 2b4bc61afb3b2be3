"""Two-state tumor/immune virtual patient.

The state is (x, y): tumor cell count and immune cell density, in the
model-scaled units used throughout the toolkit. Tumor growth follows a
log-logistic (Gompertz-type) law with immune predation; the immune pool is
stimulated by the tumor below an inverse threshold, suppressed above it,
and replenished by a constant influx:

    dx/dt = -mu_c * x * ln(x / x_inf) - gamma * x * y - x * u * eta_x
    dy/dt = mu_i * (x - beta * x^2) * y - delta * y + alpha + y * v * eta_y

u and v are the cytotoxic and immune-stimulation dose rates; eta_x, eta_y
in [0, 1] are the fractions of each dose actually delivered to the tumor
(fluctuating delivery behaves like an actuator fault).

Uncontrolled, the calibrated model has three rest points: a low-tumor
stable focus (benign), a saddle separating the basins, and a high-tumor
stable node (malignant). `find_equilibria` locates and classifies them;
`classify_basin` integrates the free system to label initial states.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

log = logging.getLogger(__name__)

# Residual bound every reported equilibrium must satisfy (max-norm of the
# uncontrolled right-hand side).
EQUILIBRIUM_RESIDUAL_TOL = 1e-8

# Arrival/basin tolerance ball around an equilibrium: |dx| <= 1.0, |dy| <= 0.05
# (about 1% of the benign coordinates).
X_TOL = 1.0
Y_TOL = 0.05

# Roots with x below this are the tumor-free boundary state (x -> 0,
# y = alpha/delta), not one of the three interior equilibria.
_X_ROOT_FLOOR = 1e-3


class PositivityError(ValueError):
    """State left the positive quadrant; an integrator-step failure."""


class EquilibriumSearchError(RuntimeError):
    """Newton sweep did not find three distinct interior equilibria."""


@dataclass(frozen=True)
class PatientParams:
    """Model constants. All rates are per day in model-scaled units."""

    mu_c: float        # tumor growth rate
    mu_i: float        # tumor-stimulated immune proliferation rate
    alpha: float       # immune influx rate
    beta: float        # inverse threshold
    gamma: float       # tumor/immune interaction rate
    delta: float       # immune death rate
    eta_x_nom: float = 0.5   # nominal chemo delivery fraction
    eta_y_nom: float = 0.5   # nominal immuno delivery fraction
    x_inf: float = 780.0     # carrying capacity

    def __post_init__(self) -> None:
        for name in ("mu_c", "mu_i", "alpha", "beta", "gamma", "delta", "x_inf"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("eta_x_nom", "eta_y_nom"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class PatientState:
    """Tumor burden x and immune density y at an instant."""

    x: float
    y: float

    def __post_init__(self) -> None:
        # ln(x/x_inf) needs x > 0; the flatness inversion divides by y.
        if not self.x > 0.0:
            raise PositivityError(f"x must be > 0, got {self.x}")
        if not self.y > 0.0:
            raise PositivityError(f"y must be > 0, got {self.y}")


class BasinLabel(Enum):
    BENIGN = "benign"
    MALIGNANT = "malignant"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class EquilibriumSet:
    """The three interior rest points of the uncontrolled system, by x."""

    benign: PatientState
    saddle: PatientState
    malignant: PatientState
    residuals: tuple[float, float, float]   # max-norm of rhs at each point
    eigenvalues: tuple[tuple[complex, complex], ...]  # FD-Jacobian spectra

    def __post_init__(self) -> None:
        if not self.benign.x < self.saddle.x < self.malignant.x:
            raise ValueError("equilibria must be ordered benign < saddle < malignant in x")
        if max(self.residuals) >= EQUILIBRIUM_RESIDUAL_TOL:
            raise ValueError(f"equilibrium residual too large: {max(self.residuals):.3e}")

    @property
    def states(self) -> tuple[PatientState, PatientState, PatientState]:
        return (self.benign, self.saddle, self.malignant)

    @property
    def labels(self) -> tuple[str, str, str]:
        return ("stable", "saddle", "stable")


# Parameter presets.
#
# equilibria-calibrated: dimensionless scaling of the two-population model,
# seeded from the classic scaled constants (mu_c=0.5599, gamma=1, x_inf=780,
# alpha=0.1181) and with mu_i, beta, delta re-solved so the free system's
# rest points sit exactly at x = 73, 356.2, 737.3 on the tumor nullcline
# y = (mu_c/gamma) * ln(x_inf/x). All scenario presets use this calibration.
#
# table-verbatim: literature values in raw units (cells/day); dimensionally
# inconsistent with the scaled state units above, and its free system has
# only two interior rest points — equilibrium search fails for it by design.
# The beta entry is ambiguous in its source; 0.0031 is the assumed reading.
PARAM_PRESETS: dict[str, PatientParams] = {
    "equilibria-calibrated": PatientParams(
        mu_c=0.5599,
        mu_i=0.004848892786063692,
        alpha=0.1181,
        beta=0.002635437317023387,
        gamma=1.0,
        delta=0.3749141438505263,
        eta_x_nom=0.5,
        eta_y_nom=0.5,
        x_inf=780.0,
    ),
    "table-verbatim": PatientParams(
        mu_c=1.0078e7,
        mu_i=0.0029,
        alpha=0.0827,
        beta=0.0031,
        gamma=1.0e7,
        delta=0.1873,
        eta_x_nom=0.5,
        eta_y_nom=0.5,
        x_inf=780.0e6,
    ),
}


def rhs(
    state: PatientState,
    u: float,
    v: float,
    eta_x: float,
    eta_y: float,
    p: PatientParams,
) -> tuple[float, float]:
    """Time derivative (dx/dt, dy/dt) under dose rates u, v.

    Raises PositivityError if the state has left the positive quadrant.
    Doses are expected nonnegative in normal use but are not clamped here,
    so the flatness inversion can be verified against unclipped demands.
    """
    x, y = state.x, state.y
    if not (x > 0.0 and y > 0.0):
        raise PositivityError(f"rhs needs x > 0 and y > 0, got ({x}, {y})")
    dx = -p.mu_c * x * math.log(x / p.x_inf) - p.gamma * x * y - x * u * eta_x
    dy = p.mu_i * (x - p.beta * x * x) * y - p.delta * y + p.alpha + y * v * eta_y
    return dx, dy


def _rhs_xy(x: float, y: float, u: float, v: float,
            eta_x: float, eta_y: float, p: PatientParams) -> tuple[float, float]:
    """rhs on raw floats; hot path for the integrator and root finder."""
    if not (x > 0.0 and y > 0.0):
        raise PositivityError(f"state left the positive quadrant: ({x}, {y})")
    dx = -p.mu_c * x * math.log(x / p.x_inf) - p.gamma * x * y - x * u * eta_x
    dy = p.mu_i * (x - p.beta * x * x) * y - p.delta * y + p.alpha + y * v * eta_y
    return dx, dy


def rk4_step_xy(x: float, y: float, u: float, v: float,
                eta_x: float, eta_y: float, p: PatientParams,
                dt: float) -> tuple[float, float]:
    """One classical RK4 step with controls and eta held constant (ZOH)."""
    k1x, k1y = _rhs_xy(x, y, u, v, eta_x, eta_y, p)
    h2 = 0.5 * dt
    k2x, k2y = _rhs_xy(x + h2 * k1x, y + h2 * k1y, u, v, eta_x, eta_y, p)
    k3x, k3y = _rhs_xy(x + h2 * k2x, y + h2 * k2y, u, v, eta_x, eta_y, p)
    k4x, k4y = _rhs_xy(x + dt * k3x, y + dt * k3y, u, v, eta_x, eta_y, p)
    xn = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    yn = y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    if not (xn > 0.0 and yn > 0.0 and math.isfinite(xn) and math.isfinite(yn)):
        raise PositivityError(
            f"integrator step left the positive quadrant: ({x}, {y}) -> ({xn}, {yn})")
    return xn, yn


def _jacobian_analytic(x: float, y: float, p: PatientParams) -> np.ndarray:
    """Jacobian of the uncontrolled rhs; used inside the Newton sweep."""
    return np.array([
        [-p.mu_c * (math.log(x / p.x_inf) + 1.0) - p.gamma * y, -p.gamma * x],
        [p.mu_i * (1.0 - 2.0 * p.beta * x) * y, p.mu_i * (x - p.beta * x * x) - p.delta],
    ])


def jacobian_fd(state: PatientState, p: PatientParams,
                rel_step: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of the uncontrolled rhs."""
    x, y = state.x, state.y
    hx = rel_step * max(abs(x), 1.0)
    hy = rel_step * max(abs(y), 1.0)
    fxp = _rhs_xy(x + hx, y, 0.0, 0.0, 0.0, 0.0, p)
    fxm = _rhs_xy(x - hx, y, 0.0, 0.0, 0.0, 0.0, p)
    fyp = _rhs_xy(x, y + hy, 0.0, 0.0, 0.0, 0.0, p)
    fym = _rhs_xy(x, y - hy, 0.0, 0.0, 0.0, 0.0, p)
    return np.array([
        [(fxp[0] - fxm[0]) / (2.0 * hx), (fyp[0] - fym[0]) / (2.0 * hy)],
        [(fxp[1] - fxm[1]) / (2.0 * hx), (fyp[1] - fym[1]) / (2.0 * hy)],
    ])


def _newton_root(x0: float, y0: float, p: PatientParams,
                 max_iter: int = 100) -> tuple[float, float] | None:
    """Damped Newton on the uncontrolled rhs from one seed; None on failure."""
    x, y = x0, y0
    for _ in range(max_iter):
        fx, fy = _rhs_xy(x, y, 0.0, 0.0, 0.0, 0.0, p)
        res = max(abs(fx), abs(fy))
        if res < 1e-13:
            return x, y
        try:
            step = np.linalg.solve(_jacobian_analytic(x, y, p), [-fx, -fy])
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        while lam > 1e-8:
            xn, yn = x + lam * step[0], y + lam * step[1]
            if xn > 0.0 and yn > 0.0:
                gx, gy = _rhs_xy(xn, yn, 0.0, 0.0, 0.0, 0.0, p)
                if max(abs(gx), abs(gy)) < res:
                    break
            lam *= 0.5
        else:
            return None
        x, y = x + lam * step[0], y + lam * step[1]
    fx, fy = _rhs_xy(x, y, 0.0, 0.0, 0.0, 0.0, p)
    if max(abs(fx), abs(fy)) < 1e-13:
        return x, y
    return None


@lru_cache(maxsize=16)
def find_equilibria(p: PatientParams, grid: int = 20) -> EquilibriumSet:
    """Locate the three interior equilibria and classify their stability.

    Seeds a damped Newton iteration from a grid x log-spaced
    on [1, x_inf] x [1e-3, 10], merges duplicates, drops the tumor-free
    boundary root, and classifies stability from the eigenvalues of the
    finite-difference Jacobian. Raises EquilibriumSearchError unless
    exactly three distinct roots with the stable/saddle/stable pattern
    are found. Results are cached per parameter set.
    """
    roots: list[tuple[float, float]] = []
    for x0 in np.geomspace(1.0, p.x_inf, grid):
        for y0 in np.geomspace(1e-3, 10.0, grid):
            found = _newton_root(float(x0), float(y0), p)
            if found is None:
                continue
            x, y = found
            if x <= _X_ROOT_FLOOR or y <= 0.0:
                continue
            if any(abs(x - rx) <= 1e-6 and abs(y - ry) <= 1e-6 for rx, ry in roots):
                continue
            roots.append((x, y))
    if len(roots) != 3:
        raise EquilibriumSearchError(
            f"expected 3 interior equilibria, found {len(roots)}: {roots}")
    roots.sort()

    states = tuple(PatientState(x, y) for x, y in roots)
    residuals = tuple(
        max(abs(d) for d in rhs(s, 0.0, 0.0, 0.0, 0.0, p)) for s in states)
    eigs = tuple(
        tuple(np.linalg.eigvals(jacobian_fd(s, p))) for s in states)

    def _kind(ev: tuple[complex, complex]) -> str:
        re = sorted(e.real for e in ev)
        if re[1] < 0.0:
            return "stable"
        if re[0] < 0.0 < re[1]:
            return "saddle"
        return "unstable"

    kinds = tuple(_kind(e) for e in eigs)
    if kinds != ("stable", "saddle", "stable"):
        raise EquilibriumSearchError(
            f"unexpected stability pattern {kinds} for roots {roots}")
    return EquilibriumSet(
        benign=states[0], saddle=states[1], malignant=states[2],
        residuals=residuals, eigenvalues=eigs)


def classify_basin(state: PatientState, p: PatientParams,
                   horizon: float, dt: float = 1.0 / 48.0) -> BasinLabel:
    """Integrate the uncontrolled system and label the endpoint's basin.

    Returns BENIGN/MALIGNANT if the endpoint lands within (X_TOL, Y_TOL)
    of the corresponding equilibrium, UNDETERMINED otherwise (including
    integration blow-up, which is logged).
    """
    if not horizon > 0.0:
        raise ValueError("horizon must be positive")
    eq = find_equilibria(p)
    x, y = state.x, state.y
    n = int(round(horizon / dt))
    try:
        for _ in range(n):
            x, y = rk4_step_xy(x, y, 0.0, 0.0, 0.0, 0.0, p, dt)
    except PositivityError as err:
        log.warning("basin integration aborted: %s", err)
        return BasinLabel.UNDETERMINED
    for target, label in ((eq.benign, BasinLabel.BENIGN),
                          (eq.malignant, BasinLabel.MALIGNANT)):
        if abs(x - target.x) <= X_TOL and abs(y - target.y) <= Y_TOL:
            return label
    return BasinLabel.UNDETERMINED
