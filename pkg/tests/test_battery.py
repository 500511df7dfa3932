from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zwavesim.battery import Battery, BatteryParams


def kibam_rk4(q1, q2, i_mah_s, k, c, dt, steps=4000):
    """Two-well ODE integrated numerically: flow is k*c*(1-c)*(h2-h1)."""
    kp = k * c * (1 - c)
    h = dt / steps

    def f(a, b):
        flow = kp * (b / (1 - c) - a / c)
        return -i_mah_s + flow, -flow

    for _ in range(steps):
        k1 = f(q1, q2)
        k2 = f(q1 + h / 2 * k1[0], q2 + h / 2 * k1[1])
        k3 = f(q1 + h / 2 * k2[0], q2 + h / 2 * k2[1])
        k4 = f(q1 + h * k3[0], q2 + h * k3[1])
        q1 += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        q2 += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return q1, q2


@pytest.mark.parametrize("load_ma,dt", [(0.0, 3600.0), (11.6667, 600.0), (0.1, 7200.0)])
def test_closed_form_matches_numeric_integration(load_ma, dt):
    p = BatteryParams()
    b = Battery(p, available=150.0, bound=200.0)
    q1, q2 = kibam_rk4(150.0, 200.0, p.effective_current(load_ma) / 3600.0,
                       p.diffusion_rate, p.capacity_ratio, dt)
    b.advance(load_ma, dt)
    assert b.available == pytest.approx(q1, rel=1e-6, abs=1e-9)
    assert b.bound == pytest.approx(q2, rel=1e-6, abs=1e-9)


def test_fresh_battery_values():
    b = Battery.at_soc(BatteryParams(), 1.0)
    assert b.charge == pytest.approx(470.0)
    assert b.available_fill == pytest.approx(1.0)
    assert b.voltage() == pytest.approx(2.9)
    # 35 mW at 3 V is 11.667 mA through 10 ohm
    assert b.voltage(35 / 3) == pytest.approx(2.9 - 35 / 3 * 1e-3 * 10.0)


def test_peukert_factor():
    p = BatteryParams()
    assert p.effective_current(0.1) == 0.1
    assert p.effective_current(0.2) == pytest.approx(0.2)
    assert p.effective_current(11.6667) == pytest.approx(11.6667 * (11.6667 / 0.2) ** 0.25)


def test_charge_removed_equals_effective_current_times_time():
    p = BatteryParams()
    b = Battery.at_soc(p, 1.0)
    removed = b.advance(5.0, 1000.0)
    assert removed == pytest.approx(p.effective_current(5.0) * 1000.0 / 3600.0)


def test_rest_recovers_voltage_and_conserves_charge():
    b = Battery.at_soc(BatteryParams(), 0.6)
    b.advance(11.6667, 1800.0)
    v_loaded_rest = b.voltage()
    charge = b.charge
    b.advance(0.0, 3 * 3600.0)
    assert b.voltage() > v_loaded_rest
    assert b.charge == pytest.approx(charge)
    assert b.voltage() <= b.rest_voltage() + 1e-12


def test_time_to_cutoff_is_the_first_crossing():
    b = Battery.at_soc(BatteryParams(), 0.43)
    t = b.time_to_cutoff(11.6667, 600.0)
    assert t is not None and 0 < t < 600
    assert b.voltage_after(11.6667, t) == pytest.approx(1.7, abs=1e-4)
    for s in (0.0, t * 0.25, t * 0.5, t * 0.9):
        assert b.voltage_after(11.6667, s) >= 1.7


def test_time_to_cutoff_none_when_far_from_cutoff():
    assert Battery.at_soc(BatteryParams(), 1.0).time_to_cutoff(11.6667, 600.0) is None


def test_time_to_recovery():
    b = Battery.at_soc(BatteryParams(), 0.43)
    b.advance(11.6667, b.time_to_cutoff(11.6667, 600.0))
    t = b.time_to_recovery(48 * 3600.0)
    assert t is not None and t > 0
    assert b.voltage_after(0.0, t) == pytest.approx(2.0, abs=1e-4)
    empty = Battery.at_soc(BatteryParams(), 0.3)
    assert empty.time_to_recovery(48 * 3600.0) is None


@pytest.mark.parametrize("field,value", [
    ("capacity_mah", 0.0), ("capacity_ratio", 1.0), ("diffusion_rate", 0.0),
    ("peukert_exponent", 0.9), ("recovery_voltage", 1.7),
])
def test_invalid_params(field, value):
    with pytest.raises(ValueError):
        BatteryParams(**{field: value})


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.0, 40.0), st.floats(0.0, 7200.0))
def test_wells_stay_in_bounds(soc, load, dt):
    b = Battery.at_soc(BatteryParams(), soc)
    before = b.charge
    b.advance(load, dt)
    assert 0.0 <= b.available and 0.0 <= b.bound
    assert b.charge <= before + 1e-9
    assert math.isfinite(b.voltage(load))
