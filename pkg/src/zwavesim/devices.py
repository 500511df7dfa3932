"""Battery-powered sensors and the mains-powered controller.

Sensors follow one of three power-state machines:

* Wakeup Interval: deep sleep with the radio off, waking on a heartbeat
  timer, a longer wakeup timer, or user activity.
* FLiRS: deep sleep interrupted once per period by a short light sleep in
  which only beams are heard; a matching beam wakes the device.
* Manual wakeup: asleep until user activity.

Once awake a sensor stays up while addressed traffic keeps arriving within
the idle timeout.  Battery draw is integrated lazily at every state change;
brown-out and recovery instants are predicted from the battery model and
scheduled as timer events.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from . import defense
from .battery import Battery, BatteryParams
from .defense import AlertBook, AlertCause, DefensePolicy
from .frames import (
    Ack,
    BatteryReport,
    BeamFrame,
    ConfigurationGet,
    EncryptedPayload,
    MacFrame,
    NonceGet,
    NonceReport,
    WakeupNotification,
    home_id_hash,
)
from .sim import HOUR, MINUTE, MS, SECOND, EventLog, Handle, InvariantViolation, RadioChannel, Simulator

CONTROLLER_ID = 0x01
BROADCAST_ID = 0xFF

# first byte of the (opaque) encrypted payloads the model exchanges
REPORT_TAG = 0x30
ALERT_TAG = 0x71
DATA_TAG = 0x20

BROWNOUT_HORIZON = 600.0  # s
RECOVERY_HORIZON = 48 * 3600.0  # s


class PowerState(str, Enum):
    DEEP_SLEEP = "DeepSleep"
    LIGHT_SLEEP = "LightSleep"
    AWAKE = "Awake"


@dataclass(frozen=True)
class Flirs:
    light_sleep_period: int = SECOND
    light_sleep_window: int = 10 * MS

    def __post_init__(self) -> None:
        if self.light_sleep_period <= 0 or self.light_sleep_window <= 0:
            raise ValueError("FLiRS durations must be positive")
        if self.light_sleep_window >= self.light_sleep_period:
            raise ValueError("light_sleep_window must be shorter than light_sleep_period")


@dataclass(frozen=True)
class WakeupInterval:
    wakeup_interval: int = 12 * HOUR
    heartbeat_interval: int = 71 * MINUTE

    def __post_init__(self) -> None:
        if self.wakeup_interval <= 0 or self.heartbeat_interval <= 0:
            raise ValueError("wakeup and heartbeat intervals must be positive")


@dataclass(frozen=True)
class ManualWakeup:
    pass


@dataclass(frozen=True)
class MainsController:
    dos_threshold_pps: int = 50

    def __post_init__(self) -> None:
        if self.dos_threshold_pps <= 0:
            raise ValueError("dos_threshold_pps must be positive")


DeviceClass = Union[Flirs, WakeupInterval, ManualWakeup, MainsController]


@dataclass(frozen=True)
class SensorConfig:
    node_id: int
    home_id: int
    device_class: Union[Flirs, WakeupInterval, ManualWakeup] = field(default_factory=WakeupInterval)
    kind: str = "contact"
    sleep_power_mw: float = 0.02
    awake_power_mw: float = 35.0
    light_sleep_power_mw: float | None = None
    nominal_voltage: float = 3.0
    idle_timeout: int = 350 * MS
    awake_window: int = 2 * SECOND
    overload_threshold: int = 80
    overload_window: int = SECOND
    rx_power_multiplier: float = 1.0
    initial_soc: float = 1.0
    boot_delay: int = 0
    battery: BatteryParams = field(default_factory=BatteryParams)
    defenses: tuple[DefensePolicy, ...] = ()

    def __post_init__(self) -> None:
        if not 0 < self.node_id < 0xFF or self.node_id == CONTROLLER_ID:
            raise ValueError(f"sensor node_id must be in 0x02..0xFE, got 0x{self.node_id:02x}")
        if self.sleep_power_mw < 0 or self.awake_power_mw < 0:
            raise ValueError("powers must be non-negative")
        if self.nominal_voltage <= 0:
            raise ValueError("nominal_voltage must be positive")
        if self.idle_timeout <= 0 or self.awake_window <= 0:
            raise ValueError("idle_timeout and awake_window must be positive")
        if self.overload_threshold <= 0 or self.overload_window <= 0:
            raise ValueError("overload settings must be positive")
        if not 0.0 <= self.initial_soc <= 1.0:
            raise ValueError(f"initial_soc must be within [0, 1], got {self.initial_soc}")
        defense.validate_policies(self.defenses, self.idle_timeout)

    @property
    def name(self) -> str:
        return f"0x{self.node_id:02x}"


def contact_sensor(node_id: int, home_id: int, **kw) -> SensorConfig:
    kw.setdefault("device_class", WakeupInterval())
    return SensorConfig(node_id, home_id, kind="contact", sleep_power_mw=0.02, awake_power_mw=35.0, **kw)


def motion_sensor(node_id: int, home_id: int, **kw) -> SensorConfig:
    kw.setdefault("device_class", Flirs())
    return SensorConfig(node_id, home_id, kind="motion", sleep_power_mw=0.65, awake_power_mw=34.0, **kw)


@dataclass
class Network:
    """Objects shared by every node in one run."""

    sim: Simulator
    channel: RadioChannel
    seed: int
    alerts: AlertBook = field(default_factory=AlertBook)
    alarms: list[tuple[int, str]] = field(default_factory=list)
    suppressed_alarms: list[tuple[int, str]] = field(default_factory=list)
    sense_outcomes: list["SenseOutcome"] = field(default_factory=list)

    @property
    def log(self) -> EventLog:
        return self.sim.log

    def rng(self, name: str) -> random.Random:
        return random.Random(f"{self.seed}:{name}")


@dataclass(frozen=True)
class SenseOutcome:
    time: int
    node: str
    stimulus: str
    reported: bool
    reason: str = ""


class _Transmitter:
    """Serialises a node's own transmissions on the channel."""

    name: str
    net: Network

    def _init_tx(self) -> None:
        self._tx_busy_until = 0

    def transmit(self, frame: MacFrame) -> None:
        sim = self.net.sim
        start = max(sim.now, self._tx_busy_until)
        self._tx_busy_until = start + RadioChannel.frame_airtime(frame)
        self.net.channel.broadcast(frame, self.name, delay=start - sim.now)
        sim.log.record(sim.now, self.name, "tx",
                       f"0x{frame.dest_id:02x} {type(frame.payload).__name__}")


class SensorDevice(_Transmitter):
    def __init__(self, net: Network, cfg: SensorConfig, known_sources: set[int] | None = None):
        self.net = net
        self.cfg = cfg
        self.name = cfg.name
        self.node_id = cfg.node_id
        self.home_id = cfg.home_id
        self.defenses = cfg.defenses
        self.alerts = net.alerts
        self.known_sources = set(known_sources or ()) | {CONTROLLER_ID}
        self.battery = Battery.at_soc(cfg.battery, cfg.initial_soc)
        self.rng = net.rng(self.name)
        self._beam_hash = home_id_hash(cfg.home_id)
        self._timeout_policy = defense.timeout_policy(cfg.defenses)
        self._init_tx()

        self.state = PowerState.DEEP_SLEEP
        self.shutdown = True  # powered off until boot
        self.dead = False
        self.awake_since = 0
        self.window_until = 0
        self.last_keepalive = 0
        self.last_meaningful_rx: int | None = None
        self.distrust_until = 0
        self.pending_alerts: list[defense.SecurityAlert] = []

        # accounting
        self._last_sync = 0
        self._load_ma = 0.0
        self._power_mw = 0.0
        self.energy_mj = 0.0
        self.charge_mah = 0.0
        self.awake_us = 0
        self.reply_frames = 0
        self.nonce_reports = 0
        self._reply_times: deque[int] = deque()
        self._rx_times: deque[int] = deque()
        self.shutdowns: list[int] = []
        self.awake_episodes: list[tuple[int, int]] = []
        self.shutdown_voltages: list[float] = []
        self.reboots: list[tuple[int, float]] = []
        self.death_time: int | None = None
        self.reports_sent = 0

        self._h_brownout: Handle | None = None
        self._h_recovery: Handle | None = None
        self._h_sleep: Handle | None = None
        self._timers: list[Handle] = []

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self.net.sim.schedule(self.net.sim.now + self.cfg.boot_delay, self._power_on)

    def _power_on(self) -> None:
        self._sync()
        if self.battery.rest_voltage() < self.cfg.battery.recovery_voltage:
            self._die("battery below recovery voltage at power-on")
            return
        if self.battery.voltage(0.0) < self.cfg.battery.recovery_voltage:
            self._begin_recovery()
            return
        self._boot()

    def _boot(self) -> None:
        sim = self.net.sim
        self.shutdown = False
        self.reboots.append((sim.now, self.battery.voltage(0.0)))
        sim.log.record(sim.now, self.name, "boot", f"v={self.battery.voltage(0.0):.4f}")
        dc = self.cfg.device_class
        if isinstance(dc, WakeupInterval):
            self._timers.append(sim.call_in(dc.heartbeat_interval, self._on_heartbeat))
            self._timers.append(sim.call_in(dc.wakeup_interval, self._on_wakeup_timer))
            self._wake(WakeupNotification())
        else:
            if isinstance(dc, Flirs):
                offset = self.rng.randrange(dc.light_sleep_period)
                self._timers.append(sim.call_in(offset, self._light_sleep_tick))
            self._wake(BatteryReport(self.battery_level()))

    def battery_level(self) -> int:
        return max(0, min(100, int(round(self.battery.soc * 100))))

    # -- power accounting ----------------------------------------------------

    def _state_power(self) -> float:
        if self.shutdown:
            return 0.0
        if self.state is PowerState.AWAKE:
            return self.cfg.awake_power_mw * self.cfg.rx_power_multiplier
        if self.state is PowerState.LIGHT_SLEEP and self.cfg.light_sleep_power_mw is not None:
            return self.cfg.light_sleep_power_mw
        return self.cfg.sleep_power_mw

    def _sync(self) -> None:
        now = self.net.sim.now
        dt_us = now - self._last_sync
        if dt_us > 0:
            dt = dt_us / SECOND
            self.charge_mah += self.battery.advance(self._load_ma, dt)
            self.energy_mj += self._power_mw * dt
            if self.state is PowerState.AWAKE and not self.shutdown:
                self.awake_us += dt_us
            self._last_sync = now

    def _refresh_load(self) -> None:
        """Sync, recompute the draw, and re-arm brown-out detection if it changed."""
        self._sync()
        p = self._state_power()
        if p != self._power_mw or self._h_brownout is None:
            self._power_mw = p
            self._load_ma = p / self.cfg.nominal_voltage
            self._arm_brownout()

    def _set_state(self, new: PowerState) -> None:
        if new is self.state:
            return
        self._sync()
        old = self.state
        self.state = new
        if new is PowerState.AWAKE:
            self.awake_since = self.net.sim.now
        elif old is PowerState.AWAKE:
            self.awake_episodes.append((self.awake_since, self.net.sim.now))
        if old is PowerState.AWAKE or new is PowerState.AWAKE:
            self.net.sim.log.record(self.net.sim.now, self.name, "state", new.value)
        self._refresh_load()

    def _arm_brownout(self) -> None:
        if self._h_brownout is not None:
            self._h_brownout.cancel()
            self._h_brownout = None
        if self.shutdown:
            return
        sim = self.net.sim
        t = self.battery.time_to_cutoff(self._load_ma, BROWNOUT_HORIZON)
        if t is None:
            self._h_brownout = sim.call_in(int(BROWNOUT_HORIZON * SECOND), self._brownout_recheck)
        else:
            self._h_brownout = sim.call_in(math.ceil(t * SECOND), self._brownout_check)

    def _brownout_recheck(self) -> None:
        self._h_brownout = None
        self._sync()
        self._arm_brownout()

    def _brownout_check(self) -> None:
        self._h_brownout = None
        self._sync()
        if self.battery.voltage(self._load_ma) < self.cfg.battery.cutoff_voltage:
            self._shut_down()
        else:
            self._arm_brownout()

    def _cancel_timers(self) -> None:
        for h in self._timers:
            h.cancel()
        self._timers.clear()
        for name in ("_h_sleep", "_h_brownout", "_h_recovery"):
            h = getattr(self, name)
            if h is not None:
                h.cancel()
                setattr(self, name, None)

    def _shut_down(self) -> None:
        sim = self.net.sim
        self._sync()
        v = self.battery.voltage(self._load_ma)
        self._cancel_timers()
        if self.state is PowerState.AWAKE:
            self.awake_episodes.append((self.awake_since, sim.now))
        self.shutdown = True
        self.state = PowerState.DEEP_SLEEP
        self._power_mw = 0.0
        self._load_ma = 0.0
        self.shutdowns.append(sim.now)
        self.shutdown_voltages.append(v)
        sim.log.record(sim.now, self.name, "shutdown", f"v={v:.4f} soc={self.battery.soc:.5f}")
        if self.battery.rest_voltage() < self.cfg.battery.recovery_voltage:
            self._die("rest voltage below recovery")
        else:
            self._begin_recovery()

    def _begin_recovery(self) -> None:
        sim = self.net.sim
        t = self.battery.time_to_recovery(RECOVERY_HORIZON)
        if t is None:
            if self.battery.rest_voltage() < self.cfg.battery.recovery_voltage:
                self._die("rest voltage below recovery")
                return
            delay = int(RECOVERY_HORIZON * SECOND)
        else:
            delay = math.ceil(t * SECOND)
        self._h_recovery = sim.call_in(delay, self._recovery_check)

    def _recovery_check(self) -> None:
        self._h_recovery = None
        self._sync()
        v = self.battery.voltage(0.0)
        if v >= self.cfg.battery.recovery_voltage:
            self._boot()
        else:
            self._begin_recovery()

    def _die(self, why: str) -> None:
        sim = self.net.sim
        self.shutdown = True
        self.dead = True
        self.death_time = sim.now
        self._cancel_timers()
        sim.log.record(sim.now, self.name, "death", why)

    # -- awake/sleep management -----------------------------------------------

    @property
    def is_awake(self) -> bool:
        return self.state is PowerState.AWAKE and not self.shutdown

    @property
    def operable(self) -> bool:
        return not self.shutdown

    def _wake(self, announce=None) -> None:
        now = self.net.sim.now
        self._set_state(PowerState.AWAKE)
        self.window_until = max(self.window_until, now + self.cfg.awake_window)
        if announce is not None:
            self._send_to_controller(announce)
        self._arm_sleep_check()

    def _sleep_deadline(self) -> tuple[int, bool]:
        idle = max(self.window_until, self.last_keepalive + self.cfg.idle_timeout)
        if self._timeout_policy is not None:
            forced = defense.forced_sleep_deadline(
                self._timeout_policy, self.awake_since, self.last_meaningful_rx)
            if forced < idle:
                return forced, True
        return idle, False

    def _arm_sleep_check(self) -> None:
        t, _ = self._sleep_deadline()
        h = self._h_sleep
        if h is not None and not h.cancelled and h.fire_at <= t:
            return
        if h is not None:
            h.cancel()
        self._h_sleep = self.net.sim.schedule(max(t, self.net.sim.now), self._sleep_check)

    def _sleep_check(self) -> None:
        self._h_sleep = None
        if not self.is_awake:
            return
        now = self.net.sim.now
        if defense.apply_meaningful_timeout(self, now):
            return
        t, _ = self._sleep_deadline()
        if t <= now:
            self._set_state(PowerState.DEEP_SLEEP)
        else:
            self._h_sleep = self.net.sim.schedule(t, self._sleep_check)

    def force_sleep(self, now: int) -> None:
        """Deep sleep imposed by the meaningful-packet timeout."""
        alert = self.alerts.raise_alert(now, self.name, AlertCause.FORCED_AWAKE_TIMEOUT,
                                        f"awake {(now - self.awake_since) / SECOND:.3f}s")
        if alert is not None:
            self.pending_alerts.append(alert)
            self.net.sim.log.record(now, self.name, "alert", alert.cause.value)
        self.net.sim.log.record(now, self.name, "forced_sleep", "")
        self._set_state(PowerState.DEEP_SLEEP)

    def _on_heartbeat(self) -> None:
        dc = self.cfg.device_class
        self._timers.append(self.net.sim.call_in(dc.heartbeat_interval, self._on_heartbeat))
        self._wake(BatteryReport(self.battery_level()))

    def _on_wakeup_timer(self) -> None:
        dc = self.cfg.device_class
        self._timers.append(self.net.sim.call_in(dc.wakeup_interval, self._on_wakeup_timer))
        self._wake(WakeupNotification())

    def _light_sleep_tick(self) -> None:
        sim = self.net.sim
        dc = self.cfg.device_class
        self._timers[:] = [h for h in self._timers if not h.cancelled and h.fire_at > sim.now]
        self._timers.append(sim.call_in(dc.light_sleep_period, self._light_sleep_tick))
        if self.state is not PowerState.DEEP_SLEEP or self.shutdown:
            return
        beam = self._matching_beam()
        if beam is not None:
            self._wake_by_beam(beam.end)
            return
        self._set_state(PowerState.LIGHT_SLEEP)
        self._timers.append(sim.call_in(dc.light_sleep_window, self._light_sleep_end))

    def _light_sleep_end(self) -> None:
        if self.state is PowerState.LIGHT_SLEEP and not self.shutdown:
            self._set_state(PowerState.DEEP_SLEEP)

    def _matching_beam(self):
        for b in self.net.channel.active_beams(self.name, self.net.sim.now):
            if self._beam_matches(b.beam):
                return b
        return None

    def _beam_matches(self, beam: BeamFrame) -> bool:
        return beam.node_id in (self.node_id, BROADCAST_ID) and beam.home_id_hash == self._beam_hash

    def _wake_by_beam(self, beam_end: int) -> None:
        self.last_keepalive = max(self.last_keepalive, beam_end)
        self._wake()

    # -- radio -----------------------------------------------------------------

    def can_receive(self, frame) -> bool:
        if self.shutdown:
            return False
        if self.state is PowerState.AWAKE:
            return True
        return self.state is PowerState.LIGHT_SLEEP and isinstance(frame, BeamFrame)

    def receive(self, frame, distance: float) -> None:
        if self.shutdown:
            return
        now = self.net.sim.now
        if isinstance(frame, BeamFrame):
            if not self._beam_matches(frame):
                return
            end = now
            for b in self.net.channel.active_beams(self.name, now):
                if b.beam is frame:
                    end = b.end
            if self.state is PowerState.LIGHT_SLEEP:
                self._wake_by_beam(end)
            elif self.state is PowerState.AWAKE:
                self.last_keepalive = max(self.last_keepalive, end)
            return
        if self.state is not PowerState.AWAKE:
            return
        if frame.home_id != self.home_id:
            return
        alert = defense.apply_spoof_detection(self, frame, now)
        if alert is not None:
            self.net.sim.log.record(now, self.name, "alert", f"{alert.cause.value} {alert.detail}")
            self._send_to_controller(EncryptedPayload(bytes([ALERT_TAG, frame.source_id])))
        if frame.dest_id not in (self.node_id, BROADCAST_ID):
            return
        if frame.source_id not in self.known_sources:
            return
        if defense.distrusts(self, frame, now):
            return
        self._note_rx(now)
        self.last_keepalive = now
        payload = frame.payload
        if isinstance(payload, NonceGet):
            self._reply(frame.source_id, Ack())
            self._reply(frame.source_id, NonceReport(self.rng.randbytes(8)))
            self.nonce_reports += 1
        elif isinstance(payload, EncryptedPayload):
            self.last_meaningful_rx = now
            self._reply(frame.source_id, Ack())
        elif isinstance(payload, ConfigurationGet):
            self._reply(frame.source_id, Ack())

    def _note_rx(self, now: int) -> None:
        q = self._rx_times
        q.append(now)
        lo = now - self.cfg.overload_window
        while q and q[0] <= lo:
            q.popleft()

    def overloaded(self, now: int) -> bool:
        q = self._rx_times
        lo = now - self.cfg.overload_window
        while q and q[0] <= lo:
            q.popleft()
        return len(q) >= self.cfg.overload_threshold

    def _reply(self, dest: int, payload) -> None:
        now = self.net.sim.now
        self.transmit(MacFrame(self.home_id, self.node_id, dest, payload))
        self.reply_frames += 1
        q = self._reply_times
        q.append(now)
        while q and q[0] <= now - MINUTE:
            q.popleft()

    def responses_last_minute(self, now: int) -> int:
        q = self._reply_times
        while q and q[0] <= now - MINUTE:
            q.popleft()
        return len(q)

    def _send_to_controller(self, payload) -> None:
        self.transmit(MacFrame(self.home_id, self.node_id, CONTROLLER_ID, payload))
        if self.pending_alerts:
            for alert in self.pending_alerts:
                data = bytes([ALERT_TAG, self.node_id])
                self.transmit(MacFrame(self.home_id, self.node_id, CONTROLLER_ID, EncryptedPayload(data)))
                self.net.sim.log.record(self.net.sim.now, self.name, "alert_delivered", alert.cause.value)
            self.pending_alerts.clear()

    # -- sensing ---------------------------------------------------------------

    def sense(self, stimulus: str) -> SenseOutcome:
        now = self.net.sim.now
        if self.shutdown:
            outcome = SenseOutcome(now, self.name, stimulus, False, "dead" if self.dead else "shutdown")
        elif self.overloaded(now):
            outcome = SenseOutcome(now, self.name, stimulus, False, "overload")
        else:
            self.reports_sent += 1
            self._set_state(PowerState.AWAKE)
            self.window_until = max(self.window_until, now + self.cfg.awake_window)
            self._send_to_controller(EncryptedPayload(bytes([REPORT_TAG, self.node_id])))
            self._arm_sleep_check()
            outcome = SenseOutcome(now, self.name, stimulus, True)
        self.net.sense_outcomes.append(outcome)
        self.net.sim.log.record(now, self.name, "sense",
                                f"{stimulus} {'report' if outcome.reported else 'suppressed:' + outcome.reason}")
        return outcome

    # -- metrics ---------------------------------------------------------------

    def sample(self) -> dict:
        """Bring accounting up to now and return instantaneous readings."""
        self._sync()
        now = self.net.sim.now
        if self.shutdown:
            state = "Dead" if self.dead else "Shutdown"
        else:
            state = self.state.value
        return {
            "state": state,
            "energy_mj": self.energy_mj,
            "voltage_v": self.battery.voltage(self._load_ma),
            "soc": self.battery.soc,
            "responses_per_min": self.responses_last_minute(now),
        }

    def check_invariants(self) -> None:
        b = self.battery
        cap = b.params.capacity_mah
        if not (-1e-9 <= b.charge <= cap + 1e-9):
            raise InvariantViolation(f"{self.name}: charge {b.charge} outside [0, {cap}]")
        rec = b.params.recovery_voltage
        for t, v in self.reboots:
            if v < rec - 1e-9:
                raise InvariantViolation(f"{self.name}: reboot at {v:.4f} V below recovery {rec} V (t={t})")


class Controller(_Transmitter):
    """Mains-powered hub; always listening, node id 0x01."""

    def __init__(self, net: Network, home_id: int, dclass: MainsController | None = None,
                 dos_cooldown: int = 5 * SECOND, dos_window: int = SECOND,
                 defenses: tuple[DefensePolicy, ...] = (), poll_interval: int = 0):
        self.net = net
        self.node_id = CONTROLLER_ID
        self.name = f"0x{CONTROLLER_ID:02x}"
        self.home_id = home_id
        self.dclass = dclass or MainsController()
        self.dos_cooldown = dos_cooldown
        self.dos_window = dos_window
        self.defenses = defenses
        self.alerts = net.alerts
        self.distrust_until = 0
        self.poll_interval = poll_interval
        self.rng = net.rng(self.name)
        self.devices: dict[int, SensorDevice] = {}
        self.pending: dict[int, list] = {}
        self._inbound: deque[int] = deque()
        self._last_over: int | None = None
        self._h_dos: Handle | None = None
        self.denied_intervals: list[list[int]] = []
        self.alerts_received = 0
        self.battery_levels: dict[int, int] = {}
        self._init_tx()

    def add_device(self, dev: SensorDevice) -> None:
        self.devices[dev.node_id] = dev
        self.pending.setdefault(dev.node_id, [])

    def start(self) -> None:
        if self.poll_interval > 0:
            self.net.sim.call_in(self.poll_interval, self._poll)

    @property
    def state(self) -> str:
        return "DeniedService" if self.denied(self.net.sim.now) else "Operational"

    def denied(self, now: int) -> bool:
        return self._last_over is not None and now < self._last_over + self.dos_cooldown

    def can_receive(self, frame) -> bool:
        return True

    def receive(self, frame, distance: float) -> None:
        if isinstance(frame, BeamFrame) or frame.home_id != self.home_id:
            return
        now = self.net.sim.now
        alert = defense.apply_spoof_detection(self, frame, now)
        if alert is not None:
            self.net.sim.log.record(now, self.name, "alert", f"{alert.cause.value} {alert.detail}")
        if frame.dest_id != self.node_id:
            return
        self._count_inbound(now)
        payload = frame.payload
        is_report = isinstance(payload, EncryptedPayload) and payload.data[:1] == bytes([REPORT_TAG])
        if self.denied(now):
            if is_report:
                self.net.suppressed_alarms.append((now, f"0x{frame.source_id:02x}"))
                self.net.sim.log.record(now, self.name, "alarm_suppressed", f"0x{frame.source_id:02x}")
            return
        if frame.source_id not in self.devices:
            return
        if is_report:
            self.net.alarms.append((now, f"0x{frame.source_id:02x}"))
            self.net.sim.log.record(now, self.name, "alarm", f"0x{frame.source_id:02x}")
        elif isinstance(payload, EncryptedPayload) and payload.data[:1] == bytes([ALERT_TAG]):
            self.alerts_received += 1
        elif isinstance(payload, WakeupNotification):
            self._flush(frame.source_id)
        elif isinstance(payload, BatteryReport):
            self.battery_levels[frame.source_id] = payload.level
        elif isinstance(payload, NonceGet):
            self.transmit(MacFrame(self.home_id, self.node_id, frame.source_id, Ack()))
            self.transmit(MacFrame(self.home_id, self.node_id, frame.source_id,
                                   NonceReport(self.rng.randbytes(8))))

    def _count_inbound(self, now: int) -> None:
        q = self._inbound
        q.append(now)
        lo = now - self.dos_window
        while q and q[0] <= lo:
            q.popleft()
        if len(q) >= self.dclass.dos_threshold_pps:
            if not self.denied(now):
                self.denied_intervals.append([now, -1])
                self.net.sim.log.record(now, self.name, "state", "DeniedService")
            self._last_over = now
            if self._h_dos is None:
                self._h_dos = self.net.sim.schedule(now + self.dos_cooldown, self._dos_expiry)

    def _dos_expiry(self) -> None:
        now = self.net.sim.now
        end = self._last_over + self.dos_cooldown
        if now < end:
            self._h_dos = self.net.sim.schedule(end, self._dos_expiry)
            return
        self._h_dos = None
        self.denied_intervals[-1][1] = now
        self.net.sim.log.record(now, self.name, "state", "Operational")

    def _flush(self, node_id: int) -> None:
        queue = self.pending.get(node_id, [])
        for payload in queue:
            self.transmit(MacFrame(self.home_id, self.node_id, node_id, payload))
        queue.clear()

    def _poll(self) -> None:
        sim = self.net.sim
        sim.call_in(self.poll_interval, self._poll)
        if self.denied(sim.now):
            return
        for nid, dev in sorted(self.devices.items()):
            payload = EncryptedPayload(bytes([DATA_TAG]) + self.rng.randbytes(4))
            if isinstance(dev.cfg.device_class, Flirs):
                beam = BeamFrame(nid, home_id_hash(self.home_id))
                self.net.channel.broadcast(beam, self.name, duration=1100 * MS)
                sim.log.record(sim.now, self.name, "tx", f"0x{nid:02x} Beam")
                sim.call_in(1100 * MS, self.transmit, MacFrame(self.home_id, self.node_id, nid, payload))
            else:
                # a sleeping node only needs the newest poll
                self.pending[nid][:] = [payload]
