"""Model-free feedback layer: ultra-local models with intelligent-P control.

Each channel is treated through the first-order phenomenological model

    dz/dt = F + alpha * u

where z is the tracking error, u the feedback correction, and F lumps every
unmodeled effect (delivery-fraction faults included). F is re-estimated
continuously from a sliding window by the algebraic formula

    F_hat = -(6 / tau^3) * integral_0^tau [ (tau - 2s) * z(t - tau + s)
                                            + alpha * s * (tau - s) * u(t - tau + s) ] ds

whose kernels annihilate the unknown initial error and cancel the input
history exactly when F is constant over the window. The intelligent-P law
u = -(F_hat + K_P * z) / alpha then imposes dz/dt + K_P * z = 0.

Quadrature modes for the window integral (UltraLocalConfig.quadrature):

    hold      exact kernel moments against piecewise-linear error samples
              and zero-order-held inputs — matches how doses are actually
              applied and is machine-exact on constant-F data (default)
    linear    kernel moments against piecewise-linear error AND input
              samples; error is O(dt^2) on smooth data
    trapezoid plain sample trapezoid of the integrand
    simpson   composite Simpson (3/8 tail when the window is odd)
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

QUADRATURES = ("hold", "linear", "trapezoid", "simpson")
SIGNALS = ("error", "raw")


class InsufficientHistoryError(RuntimeError):
    """The window does not yet cover tau; caller falls back to F_hat = 0."""


@dataclass(frozen=True)
class UltraLocalConfig:
    """Per-channel tuning of the model-free layer.

    alpha_x/alpha_y scale the inputs so that dz/dt and alpha*u share an
    order of magnitude; they may be negative (chemo lowers x, so alpha_x
    is) but never zero. Gains must be positive for local stability, and
    each estimation window must span at least two sampling steps.
    """

    alpha_x: float = -10000.0
    alpha_y: float = 1.0
    k_x_p: float = 100.0
    k_y_p: float = 10.0
    tau_x: float = 20.0 / 48.0
    tau_y: float = 20.0 / 48.0
    quadrature: str = "hold"
    signal: str = "error"

    def __post_init__(self) -> None:
        if self.alpha_x == 0.0 or self.alpha_y == 0.0:
            raise ValueError("input scalings alpha_x, alpha_y must be nonzero")
        if not (self.k_x_p > 0.0 and self.k_y_p > 0.0):
            raise ValueError("proportional gains must be strictly positive")
        if not (self.tau_x > 0.0 and self.tau_y > 0.0):
            raise ValueError("estimation windows must be strictly positive")
        if self.quadrature not in QUADRATURES:
            raise ValueError(f"quadrature must be one of {QUADRATURES}")
        if self.signal not in SIGNALS:
            raise ValueError(f"signal must be one of {SIGNALS}")

    def validate_against_dt(self, dt: float) -> None:
        for name, tau in (("tau_x", self.tau_x), ("tau_y", self.tau_y)):
            if tau < 2.0 * dt - 1e-12:
                raise ValueError(f"{name} must span at least two steps (2*dt)")
            m = tau / dt
            if abs(m - round(m)) > 1e-9:
                raise ValueError(f"{name} must be an integer multiple of dt")


class LoopHistory:
    """Uniformly sampled (time, signal, input) ring buffer for one channel.

    Measurements are appended when the channel is sampled; the input applied
    over the following step is appended once the controller has decided it,
    so the estimator always sees signals through *now* and inputs through
    the previous interval — exactly the data a causal loop has.
    """

    def __init__(self, dt: float, capacity: int) -> None:
        if not dt > 0.0:
            raise ValueError("dt must be positive")
        if capacity < 2:
            raise ValueError("capacity must hold at least two samples")
        self.dt = dt
        self._t: deque[float] = deque(maxlen=capacity)
        self._z: deque[float] = deque(maxlen=capacity)
        self._u: deque[float] = deque(maxlen=capacity - 1)
        self._n_meas = 0
        self._n_inputs = 0

    def __len__(self) -> int:
        return len(self._t)

    def append_measurement(self, t: float, signal: float) -> None:
        if self._t and abs((t - self._t[-1]) - self.dt) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(
                f"samples must be uniformly spaced by dt={self.dt}; "
                f"got step {t - self._t[-1]}")
        if self._n_meas != self._n_inputs:
            raise ValueError("append_input must be called once per measurement")
        self._t.append(t)
        self._z.append(signal)
        self._n_meas += 1

    def append_input(self, u: float) -> None:
        if self._n_inputs != self._n_meas - 1:
            raise ValueError("append_measurement must precede append_input")
        self._u.append(u)
        self._n_inputs += 1

    def window_intervals(self, tau: float) -> int:
        m = tau / self.dt
        mi = int(round(m))
        if abs(m - mi) > 1e-9 or mi < 2:
            raise ValueError("tau must be an integer multiple of dt, at least 2*dt")
        return mi

    def warmed_up(self, tau: float) -> bool:
        return len(self._t) >= self.window_intervals(tau) + 1

    def window(self, tau: float) -> tuple[np.ndarray, np.ndarray]:
        """Signals at the last m+1 nodes and inputs on the last m intervals."""
        m = self.window_intervals(tau)
        if len(self._t) < m + 1:
            raise InsufficientHistoryError(
                f"need {m + 1} samples to span tau={tau}, have {len(self._t)}")
        z = np.array([self._z[i] for i in range(len(self._z) - m - 1, len(self._z))])
        u = np.array([self._u[i] for i in range(len(self._u) - m, len(self._u))])
        return z, u


def _window_weights(n: int, dt: float, mode: str) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature weights for the two window kernels on n intervals.

    Returns (wz, wu) with wz . z approximating the (tau - 2s) moment of the
    signal and wu . u the s*(tau - s) moment of the input; wu has length n
    in hold mode (one weight per held interval) and n + 1 otherwise.
    """
    tau = n * dt
    s = np.arange(n + 1) * dt
    k1 = tau - 2.0 * s
    k2 = s * (tau - s)

    if mode in ("hold", "linear"):
        # Exact first-moment integration of the piecewise-linear interpolant:
        # over [s_j, s_j+dt] the left node carries A_j, the right node B_j.
        sj = s[:-1]
        a = dt * (tau - 2.0 * sj) / 2.0 - dt * dt / 3.0
        b = dt * (tau - 2.0 * sj) / 2.0 - 2.0 * dt * dt / 3.0
        wz = np.zeros(n + 1)
        wz[:-1] += a
        wz[1:] += b
        if mode == "hold":
            # Zero-order-held input: exact integral of s*(tau-s) per interval.
            m2 = tau * s * s / 2.0 - s ** 3 / 3.0
            wu = np.diff(m2)
        else:
            w = sj * (tau - sj)
            pj = dt * (w / 2.0 + dt * (tau - 2.0 * sj) / 6.0 - dt * dt / 12.0)
            qj = dt * (w / 2.0 + dt * (tau - 2.0 * sj) / 3.0 - dt * dt / 4.0)
            wu = np.zeros(n + 1)
            wu[:-1] += pj
            wu[1:] += qj
        return wz, wu

    if mode == "trapezoid":
        base = np.full(n + 1, dt)
        base[0] = base[-1] = 0.5 * dt
    elif mode == "simpson":
        base = _simpson_weights(n, dt)
    else:
        raise ValueError(f"unknown quadrature mode {mode!r}")
    return base * k1, base * k2


def _simpson_weights(n: int, dt: float) -> np.ndarray:
    """Composite Simpson weights; 3/8 rule absorbs the tail when n is odd."""
    if n < 2:
        raise ValueError("Simpson needs at least two intervals")
    w = np.zeros(n + 1)
    n_simpson = n if n % 2 == 0 else n - 3
    if n_simpson >= 2:
        w[0] += dt / 3.0
        w[n_simpson] += dt / 3.0
        w[1:n_simpson:2] += 4.0 * dt / 3.0
        w[2:n_simpson:2] += 2.0 * dt / 3.0
    if n % 2 == 1:
        w[n - 3:] += 3.0 * dt / 8.0 * np.array([1.0, 3.0, 3.0, 1.0])
    return w


def estimate_f_from_window(z: np.ndarray, u: np.ndarray, dt: float,
                           alpha: float, mode: str = "hold") -> float:
    """Algebraic F estimate from one window of samples.

    z holds the n+1 signal samples spanning [t - tau, t]. In hold mode u
    holds the n inputs applied over the window's intervals; in the node
    modes it holds n+1 input samples at the nodes.
    """
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    n = len(z) - 1
    if n < 2:
        raise ValueError("window must span at least two intervals")
    wz, wu = _window_weights(n, dt, mode)
    if len(u) != len(wu):
        raise ValueError(f"mode {mode!r} expects {len(wu)} input samples, got {len(u)}")
    tau = n * dt
    return float(-(6.0 / tau ** 3) * (wz @ z + alpha * (wu @ u)))


def estimate_F(history: LoopHistory, tau: float, alpha: float,
               mode: str = "hold") -> float:
    """F estimate at the history's latest sample time.

    Raises InsufficientHistoryError before the window covers tau. For the
    node-sample modes the current node's input (not yet decided) is taken
    as the most recently applied value.
    """
    z, u = history.window(tau)
    if mode != "hold":
        u = np.append(u, u[-1])
    return estimate_f_from_window(z, u, history.dt, alpha, mode)


def ip_control(f_hat: float, z: float, k_p: float, alpha: float) -> float:
    """Intelligent-P correction: cancel F_hat, impose dz/dt = -K_P z."""
    if alpha == 0.0:
        raise ValueError("alpha must be nonzero")
    return -(f_hat + k_p * z) / alpha


def compose_closed_loop(u_ol: float, u_mfc: float) -> float:
    """Nonnegative closed-loop dose: nominal plus correction, floored at 0."""
    if u_ol < 0.0:
        raise ValueError("nominal open-loop dose must be nonnegative")
    total = u_ol + u_mfc
    return total if total >= 0.0 else 0.0


@dataclass(frozen=True)
class MfcStepResult:
    u_cl: float
    v_cl: float
    z_x: float
    z_y: float
    fx_est: float
    fy_est: float
    u_mfc: float
    v_mfc: float


def mfc_step(t: float, measured, x_ref: float, y_ref: float,
             u_ol: float, v_ol: float, cfg: UltraLocalConfig,
             history_x: LoopHistory, history_y: LoopHistory) -> MfcStepResult:
    """One controller update for both channels.

    `measured` is the sampled patient state (anything with .x and .y).
    Computes the tracking errors, estimates F per channel (zero during
    warm-up, when the loop stays on the nominal schedule), applies the
    intelligent-P law and the nonnegative composition, and appends the
    step to the channel histories. Deterministic: no state beyond the
    histories.
    """
    z_x = measured.x - x_ref
    z_y = measured.y - y_ref
    history_x.append_measurement(t, z_x if cfg.signal == "error" else measured.x)
    history_y.append_measurement(t, z_y if cfg.signal == "error" else measured.y)

    if history_x.warmed_up(cfg.tau_x):
        fx = estimate_F(history_x, cfg.tau_x, cfg.alpha_x, cfg.quadrature)
        u_mfc = ip_control(fx, z_x, cfg.k_x_p, cfg.alpha_x)
    else:
        fx, u_mfc = 0.0, 0.0
    if history_y.warmed_up(cfg.tau_y):
        fy = estimate_F(history_y, cfg.tau_y, cfg.alpha_y, cfg.quadrature)
        v_mfc = ip_control(fy, z_y, cfg.k_y_p, cfg.alpha_y)
    else:
        fy, v_mfc = 0.0, 0.0

    u_cl = compose_closed_loop(u_ol, u_mfc)
    v_cl = compose_closed_loop(v_ol, v_mfc)
    history_x.append_input(u_mfc)
    history_y.append_input(v_mfc)
    return MfcStepResult(u_cl=u_cl, v_cl=v_cl, z_x=z_x, z_y=z_y,
                         fx_est=fx, fy_est=fy, u_mfc=u_mfc, v_mfc=v_mfc)
