"""Scenario engine: integration, presets, disturbances, comparisons."""

import math
from dataclasses import replace

import numpy as np
import pytest

from oncoctrl.engine import (
    ConstantProfile,
    PiecewiseConstantProfile,
    SampledSeriesProfile,
    ScenarioConfig,
    SimulationAbort,
    SinusoidProfile,
    compare_records,
    integrate_step,
    open_loop_variant,
    run_scenario,
    scenario_preset,
)
from oncoctrl.mfc import UltraLocalConfig
from oncoctrl.patient import PatientState, rk4_step_xy

DT = 1.0 / 48.0

COMPLETING_PRESETS = ("fast", "slow", "mismatch", "very-sick", "uncontrolled")


@pytest.fixture(scope="module")
def records():
    return {name: run_scenario(scenario_preset(name))
            for name in COMPLETING_PRESETS}


class TestIntegrateStep:
    def test_equilibrium_is_a_fixed_point(self, calibrated, equilibria):
        b = equilibria.benign
        nxt = integrate_step(b, 0.0, 0.0, 0.5, 0.5, calibrated, DT)
        assert abs(nxt.x - b.x) < 1e-10
        assert abs(nxt.y - b.y) < 1e-10

    def test_convergence_order_at_least_3_5(self, calibrated):
        # Richardson self-comparison on the free system, measured inside the
        # transient (by day 60 the flow has contracted onto the malignant
        # point and endpoint differences sit at roundoff).
        def endpoint(dt, days=12.0):
            x, y = 500.0, 0.5
            for _ in range(int(round(days / dt))):
                x, y = rk4_step_xy(x, y, 0.0, 0.0, 0.0, 0.0, calibrated, dt)
            return np.array([x, y])

        ref = endpoint(1.0 / 192.0)
        e1 = np.max(np.abs(endpoint(1.0 / 12.0) - ref))
        e2 = np.max(np.abs(endpoint(1.0 / 24.0) - ref))
        order = math.log2(e1 / e2)
        assert order >= 3.5

    def test_rejects_nonpositive_dt(self, calibrated, equilibria):
        with pytest.raises(ValueError):
            integrate_step(equilibria.benign, 0.0, 0.0, 0.5, 0.5, calibrated, 0.0)


class TestDisturbanceProfiles:
    def test_constant(self):
        assert ConstantProfile(0.31).value(17.3) == 0.31

    def test_piecewise_switches_at_times(self):
        prof = PiecewiseConstantProfile(times=(0.0, 10.0, 20.0),
                                        levels=(0.5, 0.2, 0.6))
        assert prof.value(0.0) == 0.5
        assert prof.value(9.99) == 0.5
        assert prof.value(10.0) == 0.2
        assert prof.value(25.0) == 0.6

    def test_sinusoid_respects_clamp_band(self):
        prof = SinusoidProfile(mean=0.5, amplitude=0.8, period=3.0,
                               clamp_lo=0.05, clamp_hi=1.0)
        ts = np.linspace(0.0, 9.0, 500)
        vals = np.array([prof.value(float(t)) for t in ts])
        assert vals.min() >= 0.05
        assert vals.max() <= 1.0

    def test_out_of_band_profile_is_clamped_and_logged(self, caplog):
        prof = ConstantProfile(1.4)
        with caplog.at_level("WARNING"):
            assert prof.value(0.0) == 1.0
        assert any("clamping" in r.message for r in caplog.records)

    def test_series_zero_order_hold(self):
        prof = SampledSeriesProfile(times=(0.0, 1.0, 2.0), values=(0.1, 0.9, 0.4))
        assert prof.value(0.5) == 0.1
        assert prof.value(1.0) == 0.9
        assert prof.value(5.0) == 0.4

    def test_validation(self):
        with pytest.raises(ValueError):
            PiecewiseConstantProfile(times=(1.0, 2.0), levels=(0.5, 0.6))
        with pytest.raises(ValueError):
            SinusoidProfile(mean=0.5, amplitude=0.1, period=0.0)


class TestScenarioConfig:
    def test_rejects_non_integer_step_count(self):
        with pytest.raises(ValueError):
            ScenarioConfig(duration=60.0, dt=0.7)

    def test_rejects_unknown_mode_and_preset(self):
        with pytest.raises(ValueError):
            ScenarioConfig(controller_mode="bang-bang")
        with pytest.raises(ValueError):
            ScenarioConfig(params_preset="nope")

    def test_rejects_fractional_estimator_window(self):
        with pytest.raises(ValueError):
            ScenarioConfig(ulm=UltraLocalConfig(tau_x=0.03))


class TestScenarios:
    def test_row_count_is_steps_plus_one(self, records):
        assert records["fast"].n_rows == 60 * 48 + 1

    def test_fast_reaches_benign_ball_and_settles(self, records):
        s = records["fast"].summary
        assert s.in_benign_ball
        assert s.steady_state_ok

    def test_all_closed_loop_presets_reach_benign(self, records):
        for name in ("fast", "slow", "mismatch", "very-sick"):
            assert records[name].summary.in_benign_ball, name

    def test_uncontrolled_lands_on_malignant(self, records, equilibria):
        s = records["uncontrolled"].summary
        assert s.basin == "malignant"
        assert abs(s.final_state.x - equilibria.malignant.x) < 1.0

    def test_force_zero_u_zeroes_chemo_channel(self, records):
        rec = records["very-sick"]
        assert np.all(rec.columns["u_cl"] == 0.0)
        assert rec.summary.total_u == 0.0

    def test_dose_nonnegativity_and_monotone_integrals(self, records):
        for name, rec in records.items():
            for col in ("u_cl", "v_cl", "u_ol", "v_ol"):
                assert np.all(rec.columns[col] >= 0.0), (name, col)
            assert np.all(np.diff(rec.columns["int_u"]) >= 0.0), name
            assert np.all(np.diff(rec.columns["int_v"]) >= 0.0), name
            assert np.all(rec.columns["x"] > 0.0), name
            assert np.all(rec.columns["y"] > 0.0), name

    def test_steady_state_for_completing_presets(self, records):
        for name, rec in records.items():
            assert rec.summary.steady_state_ok, name

    def test_determinism_bit_identical(self, records):
        again = run_scenario(scenario_preset("mismatch"))
        for col, arr in records["mismatch"].columns.items():
            assert np.array_equal(arr, again.columns[col]), col

    def test_reference_starts_at_initial_state(self, records):
        for name in ("fast", "slow", "mismatch", "very-sick"):
            rec = records[name]
            assert rec.columns["x_ref"][0] == rec.columns["x"][0]
            assert rec.columns["y_ref"][0] == rec.columns["y"][0]

    def test_mismatch_closed_beats_open_loop(self, records):
        ol = run_scenario(open_loop_variant(scenario_preset("mismatch")))
        cl = records["mismatch"]
        assert cl.summary.distances[0] < ol.summary.distances[0]

    def test_mismatch_enters_ball_before_day_60(self, records, equilibria):
        rec = records["mismatch"]
        in_ball = ((np.abs(rec.columns["x"] - equilibria.benign.x) <= 1.0)
                   & (np.abs(rec.columns["y"] - equilibria.benign.y) <= 0.05))
        first = np.nonzero(in_ball)[0]
        assert len(first) and rec.columns["t"][first[0]] < 60.0

    def test_very_sick_open_loop_diverges_with_partial_record(self, equilibria):
        # The open-loop immuno schedule was inverted against a chemo-assisted
        # tumor reference; with the chemo channel forced off the plan
        # overdoses, the immune pool runs away, and the integrator aborts.
        with pytest.raises(SimulationAbort) as exc:
            run_scenario(scenario_preset("very-sick-open-loop"))
        partial = exc.value.partial
        assert partial.n_rows == exc.value.step + 1
        assert np.all(partial.columns["x"] > 0.0)
        assert np.all(partial.columns["y"] > 0.0)
        last = PatientState(float(partial.columns["x"][-1]),
                            float(partial.columns["y"][-1]))
        dist = max(abs(last.x - equilibria.benign.x),
                   abs(last.y - equilibria.benign.y))
        assert dist > 1.0

    def test_nominal_conditions_keep_feedback_quiescent(self):
        # Clip-free plan (all nominal demands genuinely nonnegative), exact
        # initial match, true eta = assumed eta: the closed loop must ride
        # the nominal schedule, so closed- and open-loop records coincide.
        cfg = replace(scenario_preset("fast"), initial=PatientState(500.0, 0.2),
                      ramp_time=4.0)
        cl = run_scenario(cfg)
        ol = run_scenario(open_loop_variant(cfg))
        assert cl.schedule.u_star.min() > -1e-12
        assert cl.schedule.v_star.min() > -1e-12
        assert np.abs(cl.columns["u_mfc"]).max() <= 1e-3 * cl.columns["u_ol"].max()
        assert np.abs(cl.columns["x"] - ol.columns["x"]).max() < 1e-2
        assert np.abs(cl.columns["y"] - ol.columns["y"]).max() < 1e-3


class TestCompareRecords:
    def test_slow_uses_less_drug_than_fast(self, records):
        cmp = compare_records(records["slow"], records["fast"])
        assert cmp.total_u_delta < 0.0
        assert cmp.total_v_delta < 0.0

    def test_record_against_itself_is_zero(self, records):
        cmp = compare_records(records["fast"], records["fast"])
        assert cmp.total_u_delta == 0.0
        assert cmp.total_v_delta == 0.0
        assert cmp.max_err_x[0] == cmp.max_err_x[1]
        assert cmp.basins[0] == cmp.basins[1]

    def test_grid_mismatch_rejected(self, records):
        short = run_scenario(replace(scenario_preset("fast"), duration=30.0))
        with pytest.raises(ValueError):
            compare_records(short, records["fast"])
