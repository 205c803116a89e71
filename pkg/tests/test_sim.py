import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fretcheck.sim import (
    Fault, Scenario, ScenarioError, injection_steps, load_scenario, metrics, simulate,
)
from fretcheck.traces import dumps_trace, load_trace

from oracles import first_order_settle

DATA = Path(__file__).resolve().parents[1] / "src" / "fretcheck" / "data"


def first_order(dt=0.01, duration=4.0):
    return Scenario(duration_seconds=duration, timestep_seconds=dt, tau=0.5, controller="direct",
                    pilot_schedule=[(0.0, 1.0)])


def measured_settle(scn):
    out = simulate(scn)
    (m,) = out.metrics
    return m


def test_first_order_settle_matches_discrete_oracle():
    m = measured_settle(first_order())
    assert m.settlingTime == pytest.approx(first_order_settle(0.5, 0.01), abs=1e-9)
    assert 1.94 <= m.settlingTime <= 1.98
    assert abs(m.settlingTime - 0.5 * math.log(50)) < 0.02
    assert m.overshoot == 0.0


def test_first_order_settle_near_closed_form():
    # 2 % band of a first-order lag: tau * ln(50) = 3.912 tau
    assert 0.5 * math.log(50) == pytest.approx(3.912 * 0.5, abs=1e-3)


def test_dt_halving_converges():
    a = measured_settle(first_order(0.01)).settlingTime
    b = measured_settle(first_order(0.005)).settlingTime
    assert abs(a - b) < 2 * 0.01


def test_equilibrium():
    out = simulate(Scenario(duration_seconds=1.0, nominal_value=50.0)).trace
    assert np.all(out.values("y") == 50.0)
    assert not out.values("sensorfaults").any()
    assert out.values("controlObjectives").all()
    assert not out.values("trackingPilotCommands").any()


def test_dropout_steps():
    scn = Scenario(duration_seconds=2.0, nominal_value=50.0,
                   faults=[Fault(1.0, 1.2, "dropout")])
    tr = simulate(scn).trace
    sf = tr.values("sensorfaults")
    assert np.flatnonzero(sf).tolist() == list(range(100, 121))
    assert np.isnan(tr.values("y_meas")[100:121]).all()
    assert list(injection_steps(scn.faults[0], 0.01)) == list(range(100, 121))


def test_hold_last_value_during_dropout():
    scn = Scenario(duration_seconds=2.0, nominal_value=50.0, pilot_schedule=[(0.5, 80.0)],
                   faults=[Fault(0.9, 1.0, "dropout")])
    u = simulate(scn).trace.values("u")
    assert np.all(np.isfinite(u))


def test_bias_fault_flags_sensorfaults():
    scn = Scenario(duration_seconds=1.0, nominal_value=50.0, R=0.05,
                   faults=[Fault(0.2, 0.3, "bias", 0.1), Fault(0.5, 0.6, "bias", 0.01)])
    sf = simulate(scn).trace.values("sensorfaults")
    assert np.flatnonzero(sf).tolist() == list(range(20, 31))


def test_deterministic():
    scn = load_scenario(DATA / "nominal.json")
    a, b = simulate(scn), simulate(scn)
    assert dumps_trace(a.trace, "csv") == dumps_trace(b.trace, "csv")
    assert a.metrics_json() == b.metrics_json()


def test_columns():
    tr = simulate(load_scenario(DATA / "nominal.json")).trace
    assert set(tr.names) >= {"r", "y", "y_meas", "u", "mode", "shaftSpeed", "sensorfaults",
                             "trackingPilotCommands", "controlObjectives"}
    for name in ("sensorfaults", "trackingPilotCommands", "controlObjectives", "pilotInput"):
        assert tr.kind(name) == "bool"
    assert tr.values("shaftSpeed").max() <= 10000.0


def test_metrics_identity():
    y = [1.0] * 10
    assert metrics(y, y, 0.0, {"timestep": 0.1, "e": 0.02, "delta": 1.0}) == (0.0, 0.0, 0.0)


def test_metrics_overshoot():
    r = [1.0] * 5
    y = [0.0, 0.8, 1.2, 1.05, 1.0]
    settle, over, sse = metrics(y, r, 0.0, {"timestep": 1.0, "e": 0.1, "delta": 1.0})
    assert settle == 3.0 and over == pytest.approx(0.2) and sse == 0.0


def test_unsettled_window_is_incomplete():
    scn = Scenario(duration_seconds=0.5, controller="direct", pilot_schedule=[(0.0, 1.0)])
    (m,) = simulate(scn).metrics
    assert m.settlingTime is None and not m.complete
    assert np.isnan(simulate(scn).trace.values("settlingTime")).all()


@pytest.mark.parametrize("overrides", [
    {"tau": 0}, {"timestep_seconds": 0}, {"duration_seconds": 0.001},
    {"e": 0.2, "E": 0.1}, {"pilot_schedule": [(5.0, 1.0)]},
    {"faults": [Fault(0.1, 0.3, "bias", 0.1), Fault(0.2, 0.4, "dropout")]},
    {"faults": [Fault(0.1, 0.3, "stuck")]}, {"controller": "pid"},
])
def test_invalid_scenarios(overrides):
    args = {"duration_seconds": 1.0, **overrides}
    with pytest.raises(ScenarioError):
        Scenario(**args)


def test_scenario_json_round_trip(tmp_path):
    scn = load_scenario(DATA / "degraded.json")
    p = tmp_path / "s.json"
    p.write_text(json.dumps(scn.to_dict()))
    assert load_scenario(p) == scn
    with pytest.raises(ScenarioError):
        load_scenario({"duration_seconds": 1.0, "gain": 3})


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(-100, 100))
def test_no_faults_means_no_sensorfaults(tau, target):
    scn = Scenario(duration_seconds=1.0, tau=tau, nominal_value=10.0,
                   pilot_schedule=[(0.3, target)])
    tr = simulate(scn).trace
    assert not tr.values("sensorfaults").any()
    assert load_trace(dumps_trace(tr, "csv")).equals(tr)
