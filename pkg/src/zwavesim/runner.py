"""Build a network from a scenario, run it, and summarise the results."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field
from typing import TextIO

from .attacker import Attacker, DosController
from .defense import AlertCause, SpoofDetection
from .devices import Controller, MainsController, Network, SensorDevice
from .scenario import Scenario
from .sim import SECOND, EventLog, RadioChannel, Simulator

METRICS_COLUMNS = (
    "time_s", "node", "state", "power_mw", "energy_mj", "voltage_v", "soc",
    "responses_per_min", "observed_per_min",
)


@dataclass
class DeviceSummary:
    node: str
    kind: str
    energy_mj: float
    charge_mah: float
    avg_power_mw: float
    sleep_power_mw: float
    attack_power_mw: float | None
    amplification: float | None
    awake_s: float
    first_shutdown_s: float | None
    time_of_death_s: float | None
    shutdowns: int
    reboots: int
    reports: int
    suppressed: int
    reply_frames: int
    final_soc: float
    min_reboot_voltage: float | None
    max_shutdown_voltage: float | None = None


@dataclass
class RunReport:
    scenario: str
    seed: int
    duration_s: float
    event_count: int
    event_hash: str
    devices: dict[str, DeviceSummary]
    alarms: int
    suppressed_alarms: int
    alerts: dict[str, int]
    attack: dict = field(default_factory=dict)
    controller_denied_s: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        d = json.loads(text)
        d["devices"] = {k: DeviceSummary(**v) for k, v in d["devices"].items()}
        return cls(**d)


@dataclass
class Run:
    scenario: Scenario
    sim: Simulator
    net: Network
    controller: Controller
    devices: dict[int, SensorDevice]
    attacker: Attacker | None
    report: RunReport | None = None
    attack_energy0: dict[int, float] = field(default_factory=dict)
    attack_energy1: dict[int, float] = field(default_factory=dict)
    attack_t0: int | None = None
    attack_t1: int | None = None


def build(scenario: Scenario, event_stream: TextIO | None = None) -> Run:
    sim = Simulator(EventLog(event_stream))
    channel = RadioChannel(sim)
    net = Network(sim, channel, scenario.seed)
    c = scenario.controller
    ctrl = Controller(
        net, c.home_id, MainsController(c.dos_threshold), dos_cooldown=c.dos_cooldown,
        defenses=(SpoofDetection(),) if c.spoof_detection else (), poll_interval=c.poll_interval,
    )
    channel.attach(ctrl, c.position, c.reception_range)
    ids = {d.config.node_id for d in scenario.devices}
    devices: dict[int, SensorDevice] = {}
    for d in scenario.devices:
        dev = SensorDevice(net, d.config, known_sources=ids)
        channel.attach(dev, d.position, d.reception_range)
        ctrl.add_device(dev)
        devices[d.config.node_id] = dev
    attacker = None
    if scenario.attacker is not None:
        a = scenario.attacker
        attacker = Attacker(net, home_id=a.home_id)
        if a.known_nodes:
            attacker.knowledge.preload(a.home_id, a.known_nodes)
        channel.attach(attacker, a.position, a.reception_range, sniffer=True)
        attacker.schedule(a.strategy, a.start, a.stop)
    run = Run(scenario, sim, net, ctrl, devices, attacker)
    ctrl.start()
    for dev in devices.values():
        dev.start()
    for s in scenario.stimuli:
        sim.schedule(s.time, devices[s.target].sense, s.kind)
    if attacker is not None:
        sim.schedule(scenario.attacker.start, _mark_attack, run, run.attack_energy0, "attack_t0")
        if scenario.attacker.stop is not None and scenario.attacker.stop <= scenario.duration:
            sim.schedule(scenario.attacker.stop, _mark_attack, run, run.attack_energy1, "attack_t1")
    return run


def _mark_attack(run: Run, store: dict[int, float], attr: str) -> None:
    setattr(run, attr, run.sim.now)
    for nid, dev in run.devices.items():
        dev._sync()
        store[nid] = dev.energy_mj


def _sampler(run: Run, writer, last: dict[int, tuple[int, float]]) -> None:
    sim = run.sim
    now = sim.now
    for nid, dev in sorted(run.devices.items()):
        row = dev.sample()
        t_prev, e_prev = last[nid]
        dt = (now - t_prev) / SECOND
        power = (row["energy_mj"] - e_prev) / dt if dt > 0 else 0.0
        last[nid] = (now, row["energy_mj"])
        obs = run.attacker.observed_rate(nid, now) if run.attacker is not None else None
        writer.writerow((
            f"{now / SECOND:.6f}", dev.name, row["state"], f"{power:.6f}", f"{row['energy_mj']:.6f}",
            f"{row['voltage_v']:.5f}", f"{row['soc']:.6f}", row["responses_per_min"],
            "" if obs is None else obs,
        ))
    nxt = now + run.scenario.sample_interval
    if nxt < run.scenario.duration:
        sim.schedule(nxt, _sampler, run, writer, last)
    elif now < run.scenario.duration:
        sim.schedule(run.scenario.duration, _sampler, run, writer, last)


class _NullWriter:
    def writerow(self, row) -> None:
        pass


def execute(scenario: Scenario, out_dir: str | None = None, metrics: bool = True) -> Run:
    """Run ``scenario``; write outputs under ``out_dir`` if given."""
    ev = mf = None
    try:
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            ev = open(os.path.join(out_dir, scenario.events_path), "w", encoding="utf-8")
            mf = open(os.path.join(out_dir, scenario.metrics_path), "w", newline="", encoding="utf-8")
        run = build(scenario, ev)
        writer = csv.writer(mf) if mf is not None else _NullWriter()
        writer.writerow(METRICS_COLUMNS)
        if metrics or mf is not None:
            last = {nid: (0, 0.0) for nid in run.devices}
            run.sim.schedule(min(scenario.sample_interval, scenario.duration), _sampler, run, writer, last)
        run.sim.run_until(scenario.duration)
        for dev in run.devices.values():
            dev._sync()
            dev.check_invariants()
        if run.attacker is not None:
            run.attacker.finish_estimates()
        run.report = summarise(run)
        if out_dir is not None:
            with open(os.path.join(out_dir, scenario.report_path), "w", encoding="utf-8") as f:
                f.write(run.report.to_json())
            with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as f:
                f.write(format_report(run.report))
        return run
    finally:
        for f in (ev, mf):
            if f is not None:
                f.close()


def summarise(run: Run) -> RunReport:
    sc = run.scenario
    now = run.sim.now
    devices: dict[str, DeviceSummary] = {}
    t0 = run.attack_t0
    t1 = now if run.attack_t1 is None else run.attack_t1
    for nid, dev in sorted(run.devices.items()):
        span = now / SECOND
        attack_power = amp = None
        if t0 is not None and t1 > t0:
            e1 = run.attack_energy1.get(nid, dev.energy_mj)
            attack_power = (e1 - run.attack_energy0.get(nid, 0.0)) / ((t1 - t0) / SECOND)
            if dev.cfg.sleep_power_mw > 0:
                amp = attack_power / dev.cfg.sleep_power_mw
        outs = [o for o in run.net.sense_outcomes if o.node == dev.name]
        devices[dev.name] = DeviceSummary(
            node=dev.name,
            kind=dev.cfg.kind,
            energy_mj=dev.energy_mj,
            charge_mah=dev.charge_mah,
            avg_power_mw=dev.energy_mj / span if span > 0 else 0.0,
            sleep_power_mw=dev.cfg.sleep_power_mw,
            attack_power_mw=attack_power,
            amplification=amp,
            awake_s=dev.awake_us / SECOND,
            first_shutdown_s=dev.shutdowns[0] / SECOND if dev.shutdowns else None,
            time_of_death_s=dev.death_time / SECOND if dev.death_time is not None else None,
            shutdowns=len(dev.shutdowns),
            reboots=len(dev.reboots),
            reports=sum(1 for o in outs if o.reported),
            suppressed=sum(1 for o in outs if not o.reported),
            reply_frames=dev.reply_frames,
            final_soc=dev.battery.soc,
            min_reboot_voltage=min((v for _, v in dev.reboots), default=None),
            max_shutdown_voltage=max(dev.shutdown_voltages, default=None),
        )
    alerts = {c.value: run.net.alerts.count(c) for c in AlertCause}
    attack: dict = {}
    if run.attacker is not None:
        a = run.attacker
        attack = {
            "strategy": type(a.strategy).__name__,
            "scheduled_start_s": sc.attacker.start / SECOND,
            "launched_at_s": None if a.launched_at is None else a.launched_at / SECOND,
            "frames_sent": a.sent,
            "estimates": [
                {
                    "target": f"0x{e.target:02x}",
                    "cycle": e.cycle,
                    "status": e.status,
                    "time_to_ramping_s": None if e.time_to_ramping is None else e.time_to_ramping / SECOND,
                    "initial_rate_per_min": e.initial_rate,
                    "hook_s": None if e.hook_time is None else e.hook_time / SECOND,
                    "distance_m": e.distance_m,
                }
                for e in a.estimates
            ],
            "ranking": [f"0x{e.target:02x}" for e in a.ranking(a.cycle)],
        }
        if isinstance(a.strategy, DosController):
            attack["alter_home_id"] = a.strategy.alter_home_id
    denied = 0
    for start, end in run.controller.denied_intervals:
        denied += (now if end < 0 else end) - start
    return RunReport(
        scenario=sc.name,
        seed=sc.seed,
        duration_s=sc.duration / SECOND,
        event_count=run.sim.log.count,
        event_hash=run.sim.log.hexdigest(),
        devices=devices,
        alarms=len(run.net.alarms),
        suppressed_alarms=len(run.net.suppressed_alarms),
        alerts=alerts,
        attack=attack,
        controller_denied_s=denied / SECOND,
    )


# -- text report ---------------------------------------------------------------


def _fmt_h(s: float | None) -> str:
    return "-" if s is None else f"{s / 3600:.2f} h"


def format_report(r: RunReport) -> str:
    lines = [
        f"scenario {r.scenario}  seed {r.seed}  duration {_fmt_h(r.duration_s)}",
        f"events {r.event_count}  hash {r.event_hash[:16]}",
        "",
        "attack efficacy",
    ]
    start = r.attack.get("scheduled_start_s") if r.attack else None
    for name, d in r.devices.items():
        lines.append(f"  device {name} ({d.kind})")
        if d.amplification is not None:
            lines.append(f"    power amplification: {d.amplification:.0f}x  "
                         f"[{d.attack_power_mw:.3f} mW vs {d.sleep_power_mw} mW sleep]")
        lines.append(f"    energy {d.energy_mj / 1000:.3f} J  charge {d.charge_mah:.2f} mAh  final soc {d.final_soc:.3f}")
        if d.time_of_death_s is not None and d.time_of_death_s <= (start or 0.0):
            lines.append(f"    dead before the attack at {_fmt_h(d.time_of_death_s)}")
        elif d.time_of_death_s is not None:
            drain = d.time_of_death_s - (start or 0.0)
            lines.append(f"    drain time: {_fmt_h(drain)} from attack start")
        if d.shutdowns:
            line = f"    shutdowns {d.shutdowns}, first at {_fmt_h(d.first_shutdown_s)}"
            if d.max_shutdown_voltage is not None:
                line += f"; highest shutdown voltage {d.max_shutdown_voltage:.3f} V"
            if d.min_reboot_voltage is not None:
                line += f"; lowest reboot voltage {d.min_reboot_voltage:.3f} V"
            lines.append(line)
        if d.reports or d.suppressed:
            lines.append(f"    stimuli: {d.reports} reported, {d.suppressed} suppressed")
    lines.append(f"  suppressed alarms: {r.suppressed_alarms}  (alarms raised: {r.alarms})")
    if r.controller_denied_s:
        lines.append(f"  controller denied service for {r.controller_denied_s:.1f} s")
    total = sum(r.alerts.values())
    detail = ", ".join(f"{v} {k}" for k, v in r.alerts.items() if v)
    lines.append(f"  alerts: {total}" + (f" ({detail})" if detail else ""))
    if r.attack:
        lines.append("")
        lines.append(f"attacker: {r.attack['strategy']}, {r.attack['frames_sent']} frames sent")
        for e in r.attack.get("estimates", []):
            ttr = e["time_to_ramping_s"]
            lines.append(
                f"  {e['target']} cycle {e['cycle']}: {e['status']}"
                + ("" if ttr is None else f" after {ttr / 60:.1f} min")
                + ("" if e["initial_rate_per_min"] is None else f", initial {e['initial_rate_per_min']}/min")
            )
        if r.attack.get("ranking"):
            lines.append("  weakest first: " + ", ".join(r.attack["ranking"]))
    return "\n".join(lines) + "\n"


def metrics_energy(path: str) -> dict[str, float]:
    """Final cumulative energy per node from a metrics CSV, in mJ."""
    out: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            out[row["node"]] = float(row["energy_mj"])
    return out


def metrics_integral(path: str) -> dict[str, float]:
    """Integral of the power column per node (mJ)."""
    out: dict[str, float] = {}
    last: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            n = row["node"]
            t = float(row["time_s"])
            out[n] = out.get(n, 0.0) + float(row["power_mw"]) * (t - last.get(n, 0.0))
            last[n] = t
    return out
