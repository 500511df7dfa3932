from __future__ import annotations

import pytest

from conftest import run_preset, run_text, scenario_text
from zwavesim.attacker import (
    DosController,
    DrainFlirs,
    DrainWakeupInterval,
    NoTargets,
    RampingDetector,
    SniffedKnowledge,
    WeakestLinkProbe,
    probe_weakest_link,
)
from zwavesim.frames import BatteryReport, MacFrame, WakeupNotification
from zwavesim.sim import MINUTE, MS, SECOND

HOME = 0xC0FFEE01


def test_knowledge_learns_ids_and_roles():
    k = SniffedKnowledge()
    assert k.empty
    assert k.observe(MacFrame(HOME, 0x05, 0x01, WakeupNotification()), 10)
    assert not k.observe(MacFrame(HOME, 0x05, 0x01, WakeupNotification()), 20)
    assert k.knows(HOME, 0x05) and k.knows(HOME, 0x01)
    assert "controller" in k.networks[HOME][0x01].roles
    assert "wakeup_interval" in k.networks[HOME][0x05].roles
    k.observe(MacFrame(HOME, 0x07, 0x01, BatteryReport(90)), 30)
    assert "battery" in k.networks[HOME][0x07].roles
    assert k.sensors(HOME) == [0x05, 0x07]
    assert k.network_with(0x07) == HOME and k.network_with(0x09) is None


@pytest.mark.parametrize("bad", [
    lambda: DrainWakeupInterval(5, pps=0.5),
    lambda: DrainFlirs(5, pps=0),
    lambda: DosController(pps=-1),
    lambda: WeakestLinkProbe(ramping_drop_fraction=1.0),
    lambda: WeakestLinkProbe(cycles=3),
])
def test_strategy_validation(bad):
    with pytest.raises(ValueError):
        bad()


def _synthetic(detector, times):
    confirmed = None
    events = sorted([(t, 0) for t in times] + [(t, 1) for t in range(0, max(times) + 1, SECOND)])
    for t, kind in events:
        if kind == 1:
            detector.evaluate(t)
        elif detector.on_response(t) and confirmed is None:
            confirmed = t
    return confirmed


def test_ramping_detector_break_and_resume():
    hook = 5 * SECOND
    steady = [hook + i * 100 * MS for i in range(10 * 60 * 10)]  # 10 min at 10/s
    gap_end = steady[-1] + 90 * SECOND
    resumed = [gap_end + i * 100 * MS for i in range(50)]
    det = RampingDetector(0.5)
    confirmed = _synthetic(det, steady + resumed)
    assert det.initial_rate == 600
    # trailing count first falls below 300 once half the window is silent
    assert det.drop_time == pytest.approx(steady[-1] + 30 * SECOND, abs=SECOND)
    assert confirmed == gap_end
    assert det.time_to_ramping == det.drop_time - hook


def test_ramping_detector_needs_a_resume():
    det = RampingDetector(0.5)
    _synthetic(det, [i * 100 * MS for i in range(3000)])
    det.evaluate(400 * SECOND)
    assert det.drop_time is not None
    assert det.time_to_ramping is None


def test_packets_follow_the_exact_rate():
    text = scenario_text(duration="70s",
                         attacker="strategy = drain_wakeup_interval\ntarget = 0x05\npps = 7\n"
                                  "position = 30,0\nstart = 200ms\nstop = 60s")
    run = run_text(text)
    a = run.attacker
    span = 60 * SECOND - a.launched_at
    assert a.sent == pytest.approx(span * 7 / SECOND, abs=1)


def test_attacker_waits_for_sniffed_identifiers():
    # attack scheduled before the sensor has ever transmitted
    text = scenario_text(duration="10s", device_extra="boot_delay = 3s",
                         attacker="strategy = drain_wakeup_interval\ntarget = 0x05\npps = 10\n"
                                  "position = 30,0\nstart = 0s")
    run = run_text(text)
    assert run.attacker.launched_at >= 3 * SECOND
    assert run.attacker.sent > 0


def test_attacker_out_of_range_never_launches():
    text = scenario_text(duration="10s",
                         attacker="strategy = drain_wakeup_interval\ntarget = 0x05\npps = 10\n"
                                  "position = 200,0\nrange = 100\nstart = 0s")
    run = run_text(text)
    assert run.attacker.launched_at is None and run.attacker.sent == 0


def test_probe_without_launch_has_no_ranking():
    text = scenario_text(duration="1s",
                         attacker="strategy = probe\nposition = 30,0\nstart = 5s")
    run = run_text(text)
    with pytest.raises(NoTargets):
        probe_weakest_link(run.attacker)


def test_weakest_link_ranks_lower_battery_first():
    run = run_preset("weakest_link")
    ranking = probe_weakest_link(run.attacker)
    assert [e.target for e in ranking] == [0x06, 0x05]
    assert ranking[0].time_to_ramping < ranking[1].time_to_ramping


def test_dead_target_ranks_weakest_with_zero_time():
    run = run_preset("probe_soc", soc=0.25)
    (est,) = run.attacker.estimates
    assert est.status == "dead" and est.time_to_ramping == 0


def test_flirs_drain_keeps_motion_sensor_awake():
    run = run_preset("fig6_motion")
    dev = run.devices[7]
    t0 = run.attacker.launched_at
    in_attack = [(s, e) for s, e in dev.awake_episodes if e > t0]
    assert len(in_attack) <= 1  # one continuous awake period for the whole attack
    assert run.attacker.detectors[7].initial_rate == pytest.approx(600, abs=2)
    assert run.attacker.sent > 10 * 14 * MINUTE / SECOND
