"""Virtual-patient dynamics, equilibria, and basin classification."""

import math

import numpy as np
import pytest

from oncoctrl.patient import (
    PARAM_PRESETS,
    BasinLabel,
    EquilibriumSearchError,
    PatientParams,
    PatientState,
    PositivityError,
    classify_basin,
    find_equilibria,
    jacobian_fd,
    rhs,
    rk4_step_xy,
)

DT = 1.0 / 48.0


def integrate_uncontrolled(x, y, p, days, dt=DT):
    """Independent RK4 oracle for the free system."""
    for _ in range(int(round(days / dt))):
        x, y = rk4_step_xy(x, y, 0.0, 0.0, 0.0, 0.0, p, dt)
    return x, y


class TestRhs:
    def test_carrying_capacity_with_vanishing_immune(self, calibrated):
        # ln(x_inf/x_inf) = 0 and gamma*x*y ~ 1e-9, so dx ~ 0 and dy ~ alpha.
        dx, dy = rhs(PatientState(calibrated.x_inf, 1e-12), 0.0, 0.0, 0.5, 0.5,
                     calibrated)
        assert abs(dx) < 1e-8
        assert abs(dy - calibrated.alpha) < 1e-8

    def test_equilibrium_is_a_root(self, calibrated, equilibria):
        for state in equilibria.states:
            dx, dy = rhs(state, 0.0, 0.0, 0.5, 0.5, calibrated)
            assert max(abs(dx), abs(dy)) < 1e-8

    def test_critical_start_drifts_to_malignant(self, calibrated, equilibria):
        # (500, 0.5) sits in the malignant basin: the immune pool collapses
        # first, then the tumor regrows. 60 days of free flow land on the
        # malignant equilibrium.
        x, y = integrate_uncontrolled(500.0, 0.5, calibrated, days=60.0)
        assert abs(x - equilibria.malignant.x) < 1.0
        assert abs(y - equilibria.malignant.y) < 0.05

    def test_dose_terms_enter_linearly(self, calibrated):
        s = PatientState(200.0, 0.8)
        dx0, dy0 = rhs(s, 0.0, 0.0, 0.5, 0.5, calibrated)
        dx1, dy1 = rhs(s, 2.0, 3.0, 0.5, 0.5, calibrated)
        assert dx1 == pytest.approx(dx0 - s.x * 2.0 * 0.5, rel=1e-12)
        assert dy1 == pytest.approx(dy0 + s.y * 3.0 * 0.5, rel=1e-12)

    def test_rejects_nonpositive_state(self, calibrated):
        with pytest.raises(PositivityError):
            PatientState(-1.0, 0.5)
        with pytest.raises(PositivityError):
            PatientState(1.0, 0.0)


class TestParams:
    def test_rejects_nonpositive_rates(self):
        with pytest.raises(ValueError):
            PatientParams(mu_c=0.0, mu_i=1.0, alpha=1.0, beta=1.0, gamma=1.0,
                          delta=1.0)

    def test_rejects_eta_outside_unit_interval(self):
        with pytest.raises(ValueError):
            PatientParams(mu_c=1.0, mu_i=1.0, alpha=1.0, beta=1.0, gamma=1.0,
                          delta=1.0, eta_x_nom=1.5)


class TestEquilibria:
    def test_calibrated_triple(self, equilibria):
        eq = equilibria
        for state, (tx, ty) in zip(eq.states,
                                   [(73.0, 1.32), (356.2, 0.439), (737.3, 0.032)]):
            assert abs(state.x - tx) <= 0.5
            assert abs(state.y - ty) <= 0.01
        assert max(eq.residuals) < 1e-8
        assert eq.labels == ("stable", "saddle", "stable")

    def test_saddle_has_opposite_sign_eigenvalues(self, calibrated, equilibria):
        ev = np.linalg.eigvals(jacobian_fd(equilibria.saddle, calibrated))
        assert min(e.real for e in ev) < 0.0 < max(e.real for e in ev)

    def test_stable_points_have_negative_real_parts(self, calibrated, equilibria):
        for state in (equilibria.benign, equilibria.malignant):
            ev = np.linalg.eigvals(jacobian_fd(state, calibrated))
            assert all(e.real < 0.0 for e in ev)

    def test_table_verbatim_has_no_interior_triple(self):
        with pytest.raises(EquilibriumSearchError):
            find_equilibria(PARAM_PRESETS["table-verbatim"])

    def test_ordering(self, equilibria):
        assert equilibria.benign.x < equilibria.saddle.x < equilibria.malignant.x


class TestBasins:
    def test_critical_start_is_malignant(self, calibrated):
        assert classify_basin(PatientState(500.0, 0.5), calibrated,
                              horizon=200.0) is BasinLabel.MALIGNANT

    def test_very_sick_start_is_malignant(self, calibrated):
        assert classify_basin(PatientState(770.0, 0.1), calibrated,
                              horizon=200.0) is BasinLabel.MALIGNANT

    def test_equilibria_classify_as_themselves(self, calibrated, equilibria):
        assert classify_basin(equilibria.benign, calibrated,
                              horizon=200.0) is BasinLabel.BENIGN
        assert classify_basin(equilibria.malignant, calibrated,
                              horizon=200.0) is BasinLabel.MALIGNANT

    def test_rejects_nonpositive_horizon(self, calibrated):
        with pytest.raises(ValueError):
            classify_basin(PatientState(100.0, 1.0), calibrated, horizon=0.0)


class TestPositivityPreservation:
    def test_random_bounded_dosing_keeps_positive_quadrant(self, calibrated):
        # Heavy chemo is the positivity risk (it pushes x toward 0; the
        # log-logistic term must rescue it); immuno stays below the
        # sustained-overdose threshold where y would grow into stiffness
        # beyond the fixed step's stability envelope — that regime is an
        # integrator failure by definition, raised by the stepper itself.
        rng = np.random.default_rng(7)
        for _ in range(12):
            x = float(rng.uniform(5.0, 770.0))
            y = float(rng.uniform(0.05, 3.0))
            u_levels = rng.uniform(0.0, 2.0, size=8)
            v_levels = rng.uniform(0.0, 0.25, size=8)
            for k in range(60 * 48):
                u = float(u_levels[(k // 360) % 8])
                v = float(v_levels[(k // 360) % 8])
                ex = 0.5 + 0.5 * math.sin(2.0 * math.pi * k / 480.0)
                x, y = rk4_step_xy(x, y, u, v, ex, 1.0 - ex, calibrated, DT)
                assert x > 0.0 and y > 0.0
