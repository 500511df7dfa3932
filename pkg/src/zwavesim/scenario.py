"""Line-oriented scenario files.

Grammar::

    file     := (section | blank | comment)*
    section  := "[" name "]" NEWLINE (entry | blank | comment)*
    entry    := key "=" value
    comment  := "#" ...

Sections ``[scenario]``, ``[controller]`` and ``[attacker]`` appear at most
once; ``[device]`` and ``[stimulus]`` may repeat.  Durations take a unit
suffix (``us``, ``ms``, ``s``, ``min``, ``h``); bare numbers are seconds.
Integers may be written in hex (``0x05``).  Positions are ``x,y`` in metres.
See the README for every key.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from typing import Any

from .attacker import (
    AttackStrategy,
    DosController,
    DosMotionSensor,
    DrainFlirs,
    DrainWakeupInterval,
    WeakestLinkProbe,
)
from .battery import BatteryParams
from .defense import AlertUser, MeaningfulPacketTimeout, SpoofDetection, SuspiciousState
from .devices import CONTROLLER_ID, Flirs, ManualWakeup, SensorConfig, WakeupInterval
from .sim import HOUR, MINUTE, MS, SECOND


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("\n".join(errors))


_UNITS = {"us": 1, "ms": MS, "s": SECOND, "sec": SECOND, "min": MINUTE, "m": MINUTE, "h": HOUR}
_DUR = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([a-z]*)\s*$")


def parse_duration(text: str) -> int:
    m = _DUR.match(text)
    if not m:
        raise ValueError(f"bad duration {text!r}")
    value, unit = float(m.group(1)), m.group(2) or "s"
    if unit not in _UNITS:
        raise ValueError(f"unknown duration unit {unit!r}")
    return int(round(value * _UNITS[unit]))


def format_duration(us: int) -> str:
    for unit, scale in (("h", HOUR), ("min", MINUTE), ("s", SECOND), ("ms", MS)):
        if us % scale == 0 and us >= scale:
            return f"{us // scale}{unit}"
    return f"{us}us"


def parse_int(text: str) -> int:
    return int(text.strip(), 0)


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"bad boolean {text!r}")


def parse_position(text: str) -> tuple[float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"position must be x,y; got {text!r}")
    return float(parts[0]), float(parts[1])


def parse_id_list(text: str) -> tuple[int, ...]:
    return tuple(parse_int(p) for p in text.split(",") if p.strip())


# -- model -------------------------------------------------------------------


@dataclass
class DeviceSpec:
    config: SensorConfig
    position: tuple[float, float]
    reception_range: float = 40.0
    line: int = 0


@dataclass
class ControllerSpec:
    home_id: int
    position: tuple[float, float] = (0.0, 0.0)
    reception_range: float = 100.0
    dos_threshold: int = 50
    dos_cooldown: int = 5 * SECOND
    poll_interval: int = 0
    spoof_detection: bool = False


@dataclass
class AttackerSpec:
    strategy: AttackStrategy
    position: tuple[float, float]
    reception_range: float = 100.0
    start: int = 0
    stop: int | None = None
    home_id: int | None = None
    known_nodes: tuple[int, ...] = ()


@dataclass
class Stimulus:
    time: int
    target: int
    kind: str = "door_open"
    line: int = 0


@dataclass
class Scenario:
    seed: int
    duration: int
    devices: list[DeviceSpec]
    controller: ControllerSpec
    attacker: AttackerSpec | None = None
    stimuli: list[Stimulus] = field(default_factory=list)
    sample_interval: int = SECOND
    name: str = "scenario"
    metrics_path: str = "metrics.csv"
    events_path: str = "events.log"
    report_path: str = "report.json"

    def device(self, node_id: int) -> DeviceSpec:
        for d in self.devices:
            if d.config.node_id == node_id:
                return d
        raise KeyError(node_id)


# -- parsing -----------------------------------------------------------------


@dataclass
class _Section:
    name: str
    line: int
    entries: dict[str, tuple[str, int]] = field(default_factory=dict)


def _sections(text: str) -> list[_Section]:
    out: list[_Section] = []
    cur: _Section | None = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(f"line {n}: malformed section header {raw.strip()!r}")
            cur = _Section(line[1:-1].strip().lower(), n)
            out.append(cur)
            continue
        if "=" not in line:
            raise ParseError(f"line {n}: expected key = value, got {raw.strip()!r}")
        if cur is None:
            raise ParseError(f"line {n}: entry outside of any section")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.lower()
        if not key:
            raise ParseError(f"line {n}: empty key")
        if key in cur.entries:
            raise ParseError(f"line {n}: duplicate key {key!r} (first on line {cur.entries[key][1]})")
        cur.entries[key] = (value, n)
    return out


class _Reader:
    """Pulls typed values out of a section and collects errors."""

    def __init__(self, sec: _Section, errors: list[str]):
        self.sec = sec
        self.errors = errors
        self.used: set[str] = set()

    def get(self, key: str, conv, default: Any = None, required: bool = False):
        self.used.add(key)
        if key not in self.sec.entries:
            if required:
                self.errors.append(f"line {self.sec.line}: [{self.sec.name}] missing required key {key!r}")
            return default
        value, n = self.sec.entries[key]
        try:
            return conv(value)
        except (ValueError, TypeError) as exc:
            self.errors.append(f"line {n}: {key}: {exc}")
            return default

    def line_of(self, key: str) -> int:
        return self.sec.entries.get(key, ("", self.sec.line))[1]

    def finish(self, prefixes: tuple[str, ...] = ()) -> None:
        for key, (_, n) in self.sec.entries.items():
            if key not in self.used and not key.startswith(prefixes):
                self.errors.append(f"line {n}: [{self.sec.name}] unknown key {key!r}")


_BATTERY_FIELDS = {f.name for f in fields(BatteryParams) if f.name not in ("ocv_curve", "resistance_curve")}


def _battery(r: _Reader) -> BatteryParams:
    over = {}
    for key, (value, n) in r.sec.entries.items():
        if not key.startswith("battery."):
            continue
        name = key[len("battery."):]
        r.used.add(key)
        if name in _BATTERY_FIELDS:
            try:
                over[name] = float(value)
            except ValueError:
                r.errors.append(f"line {n}: {key}: not a number")
        else:
            r.errors.append(f"line {n}: unknown battery parameter {name!r}")
    try:
        return replace(BatteryParams(), **over)
    except ValueError as exc:
        r.errors.append(f"line {r.sec.line}: battery: {exc}")
        return BatteryParams()


_KINDS = {
    "contact": dict(sleep_power_mw=0.02, awake_power_mw=35.0, cls="wakeup_interval"),
    "motion": dict(sleep_power_mw=0.65, awake_power_mw=34.0, cls="flirs"),
}


def _device(sec: _Section, home_id: int, errors: list[str]) -> DeviceSpec | None:
    r = _Reader(sec, errors)
    node_id = r.get("node_id", parse_int, required=True)
    kind = r.get("kind", str, "contact")
    base = _KINDS.get(kind)
    if base is None:
        errors.append(f"line {r.line_of('kind')}: unknown device kind {kind!r} (contact, motion)")
        base = _KINDS["contact"]
    cls = r.get("class", str, base["cls"])
    if cls == "wakeup_interval":
        dclass = WakeupInterval(
            wakeup_interval=r.get("wakeup_interval", parse_duration, 12 * HOUR),
            heartbeat_interval=r.get("heartbeat_interval", parse_duration, 71 * MINUTE),
        )
    elif cls == "flirs":
        try:
            dclass = Flirs(
                light_sleep_period=r.get("light_sleep_period", parse_duration, SECOND),
                light_sleep_window=r.get("light_sleep_window", parse_duration, 10 * MS),
            )
        except ValueError as exc:
            errors.append(f"line {sec.line}: {exc}")
            dclass = Flirs()
    elif cls == "manual":
        dclass = ManualWakeup()
    else:
        errors.append(f"line {r.line_of('class')}: unknown device class {cls!r} (wakeup_interval, flirs, manual)")
        dclass = WakeupInterval()
    soc = r.get("soc", float, 1.0)
    if soc is not None and not 0.0 <= soc <= 1.0:
        errors.append(f"line {r.line_of('soc')}: soc must be within [0, 1], got {soc}")
        soc = 1.0
    defenses = []
    if r.get("meaningful_timeout", parse_duration, None) is not None:
        defenses.append(MeaningfulPacketTimeout(r.get("meaningful_timeout", parse_duration)))
    spoof = r.get("spoof_detection", str, None)
    if spoof is not None:
        if spoof == "alert":
            defenses.append(SpoofDetection(AlertUser()))
        elif spoof == "suspicious":
            defenses.append(SpoofDetection(SuspiciousState(r.get("distrust_duration", parse_duration, 30 * SECOND))))
        else:
            errors.append(f"line {r.line_of('spoof_detection')}: spoof_detection must be alert or suspicious")
    r.used.add("distrust_duration")
    position = r.get("position", parse_position, (0.0, 0.0), required=True)
    rng = r.get("range", float, 40.0)
    light = r.get("light_sleep_power", float, None)
    kw = dict(
        kind=kind,
        device_class=dclass,
        sleep_power_mw=r.get("sleep_power", float, base["sleep_power_mw"]),
        awake_power_mw=r.get("awake_power", float, base["awake_power_mw"]),
        light_sleep_power_mw=light,
        nominal_voltage=r.get("nominal_voltage", float, 3.0),
        idle_timeout=r.get("idle_timeout", parse_duration, 350 * MS),
        awake_window=r.get("awake_window", parse_duration, 2 * SECOND),
        overload_threshold=r.get("overload_threshold", parse_int, 80),
        rx_power_multiplier=r.get("rx_power_multiplier", float, 1.0),
        initial_soc=soc,
        boot_delay=r.get("boot_delay", parse_duration, 0),
        battery=_battery(r),
        defenses=tuple(defenses),
    )
    r.finish()
    if node_id is None:
        return None
    try:
        cfg = SensorConfig(node_id, home_id, **kw)
    except ValueError as exc:
        errors.append(f"line {sec.line}: device: {exc}")
        return None
    return DeviceSpec(cfg, position, rng, sec.line)


def _strategy(r: _Reader) -> AttackStrategy | None:
    name = r.get("strategy", str, None, required=True)
    target = r.get("target", parse_int, None)
    try:
        if name == "drain_flirs":
            return DrainFlirs(target, r.get("pps", float, 10.0),
                              r.get("initial_beam_ms", float, 1160.0), r.get("keepalive_beam_ms", float, 10.0))
        if name == "drain_wakeup_interval":
            return DrainWakeupInterval(target, r.get("pps", float, 10.0))
        if name == "dos_controller":
            return DosController(r.get("pps", float, 50.0), r.get("spoof_source", parse_int, None),
                                 r.get("alter_home_id", parse_bool, False))
        if name == "dos_motion":
            return DosMotionSensor(target, r.get("msg_rate", float, 80.0),
                                   r.get("initial_beam_ms", float, 1160.0), r.get("keepalive_beam_ms", float, 10.0))
        if name == "probe":
            return WeakestLinkProbe(
                targets=r.get("targets", parse_id_list, ()),
                pps=r.get("pps", float, 10.0),
                ramping_drop_fraction=r.get("ramping_drop_fraction", float, 0.5),
                stop_on_ramping=r.get("stop_on_ramping", parse_bool, False),
                cycles=r.get("cycles", parse_int, 1),
                rest=r.get("rest", parse_duration, 3 * HOUR),
            )
    except (ValueError, TypeError) as exc:
        r.errors.append(f"line {r.sec.line}: attacker: {exc}")
        return None
    if name is not None:
        r.errors.append(f"line {r.line_of('strategy')}: unknown strategy {name!r}")
    return None


def load_scenario(text: str) -> Scenario:
    """Parse and validate scenario text; raise ParseError or ValidationError."""
    secs = _sections(text)
    errors: list[str] = []
    by_name: dict[str, list[_Section]] = {}
    for s in secs:
        by_name.setdefault(s.name, []).append(s)
    for name, group in by_name.items():
        if name not in ("scenario", "controller", "attacker", "device", "stimulus"):
            errors.append(f"line {group[0].line}: unknown section [{name}]")
        elif name in ("scenario", "controller", "attacker") and len(group) > 1:
            lines = ", ".join(str(s.line) for s in group)
            errors.append(f"lines {lines}: section [{name}] may appear only once")

    if "scenario" not in by_name:
        raise ValidationError(["missing [scenario] section"])
    r = _Reader(by_name["scenario"][0], errors)
    seed = r.get("seed", parse_int, None, required=True)
    duration = r.get("duration", parse_duration, None, required=True)
    sample = r.get("sample_interval", parse_duration, SECOND)
    name = r.get("name", str, "scenario")
    metrics = r.get("metrics", str, "metrics.csv")
    events = r.get("events", str, "events.log")
    report = r.get("report", str, "report.json")
    r.finish()
    if duration is not None and duration <= 0:
        errors.append(f"line {r.line_of('duration')}: duration must be positive")
    if sample is not None and sample <= 0:
        errors.append(f"line {r.line_of('sample_interval')}: sample_interval must be positive")

    controllers = by_name.get("controller", [])
    if not controllers:
        errors.append("missing [controller] section (exactly one controller is required)")
        raise ValidationError(errors)
    r = _Reader(controllers[0], errors)
    home_id = r.get("home_id", parse_int, 0, required=True)
    if not 0 <= home_id <= 0xFFFFFFFF:
        errors.append(f"line {r.line_of('home_id')}: home_id must fit in 32 bits")
        home_id = 0
    nid = r.get("node_id", parse_int, CONTROLLER_ID)
    if nid != CONTROLLER_ID:
        errors.append(f"line {r.line_of('node_id')}: controller node_id must be 0x01")
    ctrl = ControllerSpec(
        home_id=home_id,
        position=r.get("position", parse_position, (0.0, 0.0)),
        reception_range=r.get("range", float, 100.0),
        dos_threshold=r.get("dos_threshold", parse_int, 50),
        dos_cooldown=r.get("dos_cooldown", parse_duration, 5 * SECOND),
        poll_interval=r.get("poll_interval", parse_duration, 0),
        spoof_detection=r.get("spoof_detection", parse_bool, False),
    )
    r.finish()

    devices: list[DeviceSpec] = []
    for sec in by_name.get("device", []):
        d = _device(sec, home_id, errors)
        if d is not None:
            devices.append(d)
    if not by_name.get("device"):
        errors.append("scenario has no [device] blocks")
    seen: dict[int, int] = {}
    for d in devices:
        nid = d.config.node_id
        if nid in seen:
            errors.append(f"lines {seen[nid]} and {d.line}: duplicate node_id 0x{nid:02x}")
        else:
            seen[nid] = d.line

    attacker = None
    if "attacker" in by_name:
        r = _Reader(by_name["attacker"][0], errors)
        strategy = _strategy(r)
        attacker = AttackerSpec(
            strategy=strategy,
            position=r.get("position", parse_position, (0.0, 0.0), required=True),
            reception_range=r.get("range", float, 100.0),
            start=r.get("start", parse_duration, 0),
            stop=r.get("stop", parse_duration, None),
            home_id=r.get("home_id", parse_int, None),
            known_nodes=r.get("known_nodes", parse_id_list, ()),
        )
        if attacker.known_nodes and attacker.home_id is None:
            errors.append(f"line {r.line_of('known_nodes')}: known_nodes needs home_id")
        r.finish()
        target = getattr(strategy, "target", None)
        refs = [target] if target is not None else []
        if isinstance(strategy, WeakestLinkProbe):
            refs = list(strategy.targets)
        if isinstance(strategy, DosController) and strategy.spoof_source is not None:
            refs = [strategy.spoof_source]
        for t in refs:
            if t not in seen:
                errors.append(f"line {r.line_of('target')}: attacker references unknown node 0x{t:02x}")
        if attacker.stop is not None and attacker.stop <= attacker.start:
            errors.append(f"line {r.line_of('stop')}: attacker stop must be after start")
        if strategy is None:
            attacker = None

    stimuli: list[Stimulus] = []
    for sec in by_name.get("stimulus", []):
        r = _Reader(sec, errors)
        t = r.get("time", parse_duration, None, required=True)
        target = r.get("target", parse_int, None, required=True)
        kind = r.get("kind", str, "door_open")
        every = r.get("every", parse_duration, None)
        count = r.get("count", parse_int, 1)
        r.finish()
        if target is not None and target not in seen:
            errors.append(f"line {r.line_of('target')}: stimulus targets unknown node 0x{target:02x}")
        if t is None or target is None:
            continue
        if count < 1 or (count > 1 and not every):
            errors.append(f"line {sec.line}: repeated stimuli need count >= 1 and a positive 'every'")
            continue
        for i in range(count):
            stimuli.append(Stimulus(t + i * (every or 0), target, kind, sec.line))

    if errors:
        raise ValidationError(errors)
    return Scenario(
        seed=seed,
        duration=duration,
        devices=devices,
        controller=ctrl,
        attacker=attacker,
        stimuli=sorted(stimuli, key=lambda s: (s.time, s.target)),
        sample_interval=sample,
        name=name,
        metrics_path=metrics,
        events_path=events,
        report_path=report,
    )
