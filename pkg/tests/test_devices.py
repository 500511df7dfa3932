from __future__ import annotations

import os

import pytest

from conftest import flood, rig, run_preset, run_text, scenario_text
from zwavesim.devices import PowerState
from zwavesim.frames import BeamFrame, ConfigurationGet, MacFrame, NonceGet, home_id_hash
from zwavesim.runner import metrics_integral
from zwavesim.sim import MS, SECOND

HOME = 0xC0FFEE01


def _awake_total(dev, until):
    total = sum(e - s for s, e in dev.awake_episodes)
    if dev.state is PowerState.AWAKE and not dev.shutdown:
        total += until - dev.awake_since
    return total


def test_contact_sensor_announces_at_boot_then_sleeps():
    run = run_text(scenario_text(duration="30s"))
    dev = run.devices[5]
    (s, e), = dev.awake_episodes
    assert s == 100 * MS
    # awake window of 2 s, extended by the controller's Ack keepalive
    assert 2 * SECOND <= e - s <= 2 * SECOND + 400 * MS
    assert dev.state is PowerState.DEEP_SLEEP


@pytest.mark.parametrize("pps,stays_awake", [(2, False), (3, True)])
def test_idle_timeout_separates_two_and_three_pps(pps, stays_awake):
    run, _ = rig(scenario_text(duration="20s"))
    nonce = lambda: MacFrame(HOME, 0x01, 0x05, NonceGet())
    flood(run, nonce, 500 * MS, 20 * SECOND, SECOND // pps)
    run.sim.run_until(20 * SECOND)
    dev = run.devices[5]
    awake = _awake_total(dev, run.sim.now)
    if stays_awake:
        assert awake > 19 * SECOND
    else:
        assert awake < 3 * SECOND


def test_frames_for_another_home_never_keep_a_sensor_awake():
    run, _ = rig(scenario_text(duration="20s"))
    foreign = lambda: MacFrame(HOME ^ 1, 0x01, 0x05, NonceGet())
    flood(run, foreign, 500 * MS, 20 * SECOND, 100 * MS)
    run.sim.run_until(20 * SECOND)
    dev = run.devices[5]
    assert _awake_total(dev, run.sim.now) < 3 * SECOND
    assert dev.nonce_reports == 0


def test_nonce_get_is_answered_with_ack_and_nonce_report():
    run, _ = rig(scenario_text(duration="5s"))
    flood(run, lambda: MacFrame(HOME, 0x01, 0x05, NonceGet()), 500 * MS, 1 * SECOND, 100 * MS)
    run.sim.run_until(5 * SECOND)
    dev = run.devices[5]
    assert dev.nonce_reports == 5
    assert dev.reply_frames >= 10


def test_flirs_woken_only_by_matching_beam():
    text = scenario_text(duration="10s", devices=("motion",))
    for tag_hash, expect in ((home_id_hash(HOME), True), (home_id_hash(HOME ^ 1), False)):
        run, _ = rig(text)
        beam = BeamFrame(0x05, tag_hash)
        run.sim.schedule(4 * SECOND, run.net.channel.broadcast, beam, "injector", 0, 1100 * MS)
        run.sim.run_until(10 * SECOND)
        woke = [s for s, _ in run.devices[5].awake_episodes if s >= 4 * SECOND]
        assert bool(woke) is expect


def _overload_rig(rate: int):
    stim = "\n".join(f"[stimulus]\ntime = {t}s\ntarget = 0x05\nkind = motion\n" for t in (5, 7, 9))
    run, _ = rig(scenario_text(duration="12s", devices=("motion",), stimuli=stim))
    kinds = [NonceGet(), ConfigurationGet()]
    period = SECOND / rate
    for k in range(int(11 * rate)):
        t = 500 * MS + int(k * period)
        f = MacFrame(HOME, 0x01, 0x05, kinds[k % 2])
        run.sim.schedule(t, run.net.channel.broadcast, f, "injector")
    beam = BeamFrame(0x05, home_id_hash(HOME))
    run.sim.schedule(300 * MS, run.net.channel.broadcast, beam, "injector", 0, 1100 * MS)
    run.sim.run_until(12 * SECOND)
    return [o.reason if not o.reported else "report" for o in run.net.sense_outcomes]


def test_overload_threshold_is_exact():
    assert _overload_rig(80) == ["overload"] * 3
    assert _overload_rig(79) == ["report"] * 3


def test_hysteresis_never_violated_during_ramping():
    run = run_preset("dos_contact")
    dev = run.devices[5]
    assert len(dev.shutdowns) > 10
    assert max(dev.shutdown_voltages) <= 1.7 + 1e-6
    assert min(v for _, v in dev.reboots) >= 2.0 - 1e-9


def test_energy_accounting(tmp_path):
    text = scenario_text(duration="10min", devices=("contact", "motion"),
                         attacker="strategy = drain_wakeup_interval\ntarget = 0x05\npps = 10\n"
                                  "position = 30,0\nstart = 100ms\nstop = 4min")
    run = run_text(text, str(tmp_path))
    integral = metrics_integral(os.path.join(tmp_path, "metrics.csv"))
    contact = run.devices[5]
    assert integral["0x05"] == pytest.approx(contact.energy_mj, rel=1e-6)
    assert integral["0x06"] == pytest.approx(run.devices[6].energy_mj, rel=1e-6)
    # independent tally: awake time at 35 mW plus the rest at 0.02 mW
    awake = _awake_total(contact, run.sim.now) / SECOND
    expected = awake * 35.0 + (600.0 - 0.1 - awake) * 0.02
    assert contact.energy_mj == pytest.approx(expected, rel=1e-6)


def test_dead_battery_never_boots():
    run = run_text(scenario_text(duration="1min", device_extra="soc = 0.3"))
    dev = run.devices[5]
    assert dev.dead and dev.death_time == 100 * MS
    assert dev.awake_episodes == []
