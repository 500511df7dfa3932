"""Sniffing attacker with drain, denial-of-service and probing strategies.

The attacker only ever uses identifiers it has overheard.  Packet streams are
emitted on an exact period (no jitter): packet ``k`` of a stream started at
``t0`` goes out at ``t0 + floor(k / rate)`` in integer microseconds.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Union

from .devices import BROADCAST_ID, CONTROLLER_ID, Network
from .frames import (
    BatteryReport,
    BeamFrame,
    ConfigurationGet,
    MacFrame,
    NonceGet,
    NonceReport,
    WakeupNotification,
    home_id_hash,
)
from .sim import HOUR, MINUTE, MS, SECOND, Handle


class UnknownTarget(LookupError):
    pass


class NoTargets(LookupError):
    pass


# -- knowledge ---------------------------------------------------------------


@dataclass
class NodeInfo:
    roles: set[str] = field(default_factory=set)
    last_seen: int = 0


@dataclass
class SniffedKnowledge:
    networks: dict[int, dict[int, NodeInfo]] = field(default_factory=dict)

    def observe(self, frame: MacFrame, now: int) -> bool:
        """Record ``frame``; return True if anything new was learned."""
        nodes = self.networks.get(frame.home_id)
        new = nodes is None
        if new:
            nodes = self.networks[frame.home_id] = {}
        for nid, role in ((frame.source_id, "source"), (frame.dest_id, "dest")):
            if nid == BROADCAST_ID:
                continue
            info = nodes.get(nid)
            if info is None:
                info = nodes[nid] = NodeInfo()
                new = True
            if role == "source":
                info.last_seen = now
        if frame.dest_id == CONTROLLER_ID or frame.source_id == CONTROLLER_ID:
            info = nodes[CONTROLLER_ID]
            if "controller" not in info.roles:
                info.roles.add("controller")
                new = True
        if frame.source_id != CONTROLLER_ID:
            src = nodes[frame.source_id]
            if isinstance(frame.payload, WakeupNotification) and "wakeup_interval" not in src.roles:
                src.roles.add("wakeup_interval")
            if isinstance(frame.payload, BatteryReport) and "battery" not in src.roles:
                src.roles.add("battery")
        return new

    @property
    def empty(self) -> bool:
        return not self.networks

    def home_ids(self) -> list[int]:
        return list(self.networks)

    def knows(self, home_id: int, node_id: int) -> bool:
        return node_id in self.networks.get(home_id, {})

    def network_with(self, node_id: int) -> int | None:
        for hid, nodes in self.networks.items():
            if node_id in nodes:
                return hid
        return None

    def preload(self, home_id: int, node_ids: Iterable[int]) -> None:
        """Seed identifiers learned before the run (earlier reconnaissance)."""
        nodes = self.networks.setdefault(home_id, {})
        for nid in node_ids:
            info = nodes.setdefault(nid, NodeInfo())
            if nid == CONTROLLER_ID:
                info.roles.add("controller")

    def sensors(self, home_id: int) -> list[int]:
        return sorted(n for n in self.networks.get(home_id, {}) if n != CONTROLLER_ID)


# -- strategies --------------------------------------------------------------


def _positive(name: str, v: float) -> None:
    if v <= 0:
        raise ValueError(f"{name} must be positive, got {v}")


@dataclass(frozen=True)
class DrainFlirs:
    target: int
    pps: float = 10.0
    initial_beam_ms: float = 1160.0
    keepalive_beam_ms: float = 10.0

    def __post_init__(self) -> None:
        if self.pps < 1:
            raise ValueError("pps must be >= 1")
        _positive("initial_beam_ms", self.initial_beam_ms)
        _positive("keepalive_beam_ms", self.keepalive_beam_ms)


@dataclass(frozen=True)
class DrainWakeupInterval:
    target: int
    pps: float = 10.0

    def __post_init__(self) -> None:
        if self.pps < 1:
            raise ValueError("pps must be >= 1")


@dataclass(frozen=True)
class DosController:
    pps: float = 50.0
    spoof_source: int | None = None
    alter_home_id: bool = False

    def __post_init__(self) -> None:
        _positive("pps", self.pps)


@dataclass(frozen=True)
class DosMotionSensor:
    target: int
    msg_rate: float = 80.0
    initial_beam_ms: float = 1160.0
    keepalive_beam_ms: float = 10.0

    def __post_init__(self) -> None:
        _positive("msg_rate", self.msg_rate)
        _positive("initial_beam_ms", self.initial_beam_ms)
        _positive("keepalive_beam_ms", self.keepalive_beam_ms)


@dataclass(frozen=True)
class WeakestLinkProbe:
    targets: tuple[int, ...] = ()
    pps: float = 10.0
    ramping_drop_fraction: float = 0.5
    stop_on_ramping: bool = False
    cycles: int = 1
    rest: int = 3 * HOUR
    initial_beam_ms: float = 1160.0
    keepalive_beam_ms: float = 10.0

    def __post_init__(self) -> None:
        _positive("pps", self.pps)
        if not 0.0 < self.ramping_drop_fraction < 1.0:
            raise ValueError("ramping_drop_fraction must be within (0, 1)")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if self.cycles > 1 and not self.stop_on_ramping:
            raise ValueError("repeated cycles need stop_on_ramping")
        if self.rest < 0:
            raise ValueError("rest must be non-negative")


AttackStrategy = Union[DrainFlirs, DrainWakeupInterval, DosController, DosMotionSensor, WeakestLinkProbe]


# -- estimator ---------------------------------------------------------------


@dataclass
class BatteryEstimate:
    target: int
    cycle: int
    status: str  # "ramping", "dead", "not_observed"
    time_to_ramping: int | None
    initial_rate: int | None
    distance_m: float
    hook_time: int | None = None

    @property
    def score(self) -> float:
        """Lower is weaker."""
        if self.status == "not_observed" or self.time_to_ramping is None:
            return float("inf")
        return float(self.time_to_ramping)


class RampingDetector:
    """Break/resume detector on a target's trailing 60 s response count."""

    def __init__(self, drop_fraction: float = 0.5, window: int = MINUTE):
        self.drop_fraction = drop_fraction
        self.window = window
        self.hook_time: int | None = None
        self.initial_rate: int | None = None
        self.drop_time: int | None = None
        self.ramping_time: int | None = None
        self.last_response: int | None = None
        self.total = 0
        self._times: deque[int] = deque()

    def on_response(self, now: int) -> bool:
        """Record one response; return True when it confirms ramping."""
        if self.hook_time is None:
            self.hook_time = now
        self.total += 1
        self.last_response = now
        self._times.append(now)
        if self.drop_time is not None and self.ramping_time is None:
            self.ramping_time = self.drop_time
            return True
        return False

    def rate(self, now: int) -> int:
        q = self._times
        lo = now - self.window
        while q and q[0] <= lo:
            q.popleft()
        return len(q)

    def evaluate(self, now: int) -> None:
        if self.hook_time is None or self.ramping_time is not None:
            return
        if self.initial_rate is None:
            end = self.hook_time + self.window
            if now < end:
                return
            self.initial_rate = sum(1 for t in self._times if t < end)
        if self.drop_time is None and self.rate(now) < self.drop_fraction * self.initial_rate:
            self.drop_time = now

    @property
    def time_to_ramping(self) -> int | None:
        if self.ramping_time is None or self.hook_time is None:
            return None
        return self.ramping_time - self.hook_time


@dataclass
class _Stream:
    target: int
    home_id: int
    rate: Fraction
    kinds: tuple
    beam_us: int = 0
    initial_beam_us: int = 0
    source: int = CONTROLLER_ID
    dest: int | None = None
    k: int = 0
    t0: int = 0
    handle: Handle | None = None
    active: bool = True


def _rate(v: float) -> Fraction:
    return Fraction(str(v)).limit_denominator(10_000)


class Attacker:
    """Sniffer node that runs one strategy."""

    def __init__(self, net: Network, name: str = "attacker", home_id: int | None = None):
        self.net = net
        self.name = name
        self.knowledge = SniffedKnowledge()
        self.bound_home_id = home_id
        self.strategy: AttackStrategy | None = None
        self.start_time: int | None = None
        self.stop_time: int | None = None
        self.launched_at: int | None = None
        self.streams: dict[int, _Stream] = {}
        self.detectors: dict[int, RampingDetector] = {}
        self.estimates: list[BatteryEstimate] = []
        self.cycle = 1
        self.sent = 0
        self.sent_ids: set[tuple[int, int, int]] = set()
        self.waiting = False
        self.finished = False
        self._h_eval: Handle | None = None
        self._on_knowledge: Callable[[], None] | None = None

    # -- radio ---------------------------------------------------------------

    def can_receive(self, frame) -> bool:
        return True

    def receive(self, frame, distance: float) -> None:
        if isinstance(frame, BeamFrame):
            return
        now = self.net.sim.now
        learned = self.knowledge.observe(frame, now)
        if learned:
            self.net.sim.log.record(now, self.name, "sniff",
                                    f"home=0x{frame.home_id:08x} src=0x{frame.source_id:02x}")
            if self.waiting and self._on_knowledge is not None:
                self._on_knowledge()
        if isinstance(frame.payload, NonceReport):
            det = self.detectors.get(frame.source_id)
            stream = self.streams.get(frame.source_id)
            if det is not None and stream is not None and stream.active and frame.home_id == stream.home_id:
                if det.on_response(now):
                    self._confirmed(frame.source_id)

    # -- scheduling -----------------------------------------------------------

    def schedule(self, strategy: AttackStrategy, start: int, stop: int | None = None) -> None:
        """Launch ``strategy`` at ``start``, waiting for knowledge if needed."""
        self.strategy = strategy
        self.start_time = start
        self.stop_time = stop
        self.net.sim.schedule(start, self._try_launch)
        if stop is not None:
            self.net.sim.schedule(stop, self.stop)

    def _try_launch(self) -> None:
        if self.finished:
            return
        try:
            self.launch(self.strategy)
        except (UnknownTarget, NoTargets) as exc:
            if not self.waiting:
                self.net.sim.log.record(self.net.sim.now, self.name, "waiting", str(exc))
            self.waiting = True
            self._on_knowledge = self._try_launch
            return
        self.waiting = False
        self._on_knowledge = None

    def _bind(self, node_id: int | None) -> int:
        if self.bound_home_id is not None:
            if node_id is not None and not self.knowledge.knows(self.bound_home_id, node_id):
                raise UnknownTarget(f"0x{node_id:02x} not seen in network 0x{self.bound_home_id:08x}")
            if self.bound_home_id not in self.knowledge.networks:
                raise UnknownTarget(f"network 0x{self.bound_home_id:08x} not seen")
            return self.bound_home_id
        if self.knowledge.empty:
            raise UnknownTarget("nothing sniffed yet")
        if node_id is None:
            return self.knowledge.home_ids()[0]
        hid = self.knowledge.network_with(node_id)
        if hid is None:
            raise UnknownTarget(f"0x{node_id:02x} not seen")
        return hid

    def _need(self, home_id: int, node_id: int) -> None:
        if not self.knowledge.knows(home_id, node_id):
            raise UnknownTarget(f"0x{node_id:02x} not seen in network 0x{home_id:08x}")

    def launch(self, strategy: AttackStrategy) -> None:
        """Start ``strategy`` now; raises if the needed identifiers are unknown."""
        now = self.net.sim.now
        s = strategy
        if isinstance(s, (DrainFlirs, DrainWakeupInterval, DosMotionSensor)):
            hid = self._bind(s.target)
            self._need(hid, CONTROLLER_ID)
            if isinstance(s, DrainWakeupInterval):
                streams = [_Stream(s.target, hid, _rate(s.pps), (NonceGet(),))]
            elif isinstance(s, DrainFlirs):
                streams = [_Stream(s.target, hid, _rate(s.pps), (NonceGet(),),
                                   beam_us=int(s.keepalive_beam_ms * MS),
                                   initial_beam_us=int(s.initial_beam_ms * MS))]
            else:
                streams = [_Stream(s.target, hid, _rate(s.msg_rate), (NonceGet(), ConfigurationGet()),
                                   beam_us=int(s.keepalive_beam_ms * MS),
                                   initial_beam_us=int(s.initial_beam_ms * MS))]
        elif isinstance(s, DosController):
            hid = self._bind(s.spoof_source)
            self._need(hid, CONTROLLER_ID)
            src = s.spoof_source
            if src is None:
                sensors = self.knowledge.sensors(hid)
                if not sensors:
                    raise UnknownTarget("no device to impersonate")
                src = sensors[0]
            self._need(hid, src)
            tx_home = hid ^ 0x1 if s.alter_home_id else hid
            streams = [_Stream(CONTROLLER_ID, tx_home, _rate(s.pps), (NonceGet(),),
                               source=src, dest=CONTROLLER_ID)]
        elif isinstance(s, WeakestLinkProbe):
            if self.knowledge.empty:
                raise NoTargets("nothing sniffed yet")
            hid = self._bind(s.targets[0] if s.targets else None)
            self._need(hid, CONTROLLER_ID)
            targets = list(s.targets) or self.knowledge.sensors(hid)
            if not targets:
                raise NoTargets("no battery-powered targets known")
            for t in targets:
                self._need(hid, t)
            streams = [_Stream(t, hid, _rate(s.pps), (NonceGet(),),
                               beam_us=int(s.keepalive_beam_ms * MS),
                               initial_beam_us=int(s.initial_beam_ms * MS)) for t in targets]
        else:
            raise TypeError(f"unsupported strategy {type(s).__name__}")
        if self.launched_at is None:
            self.launched_at = now
        self.net.sim.log.record(now, self.name, "launch",
                                f"{type(s).__name__} cycle={self.cycle} home=0x{streams[0].home_id:08x}")
        for st in streams:
            self._start_stream(st)
        if not isinstance(s, DosController):
            frac = s.ramping_drop_fraction if isinstance(s, WeakestLinkProbe) else 0.5
            for st in streams:
                self.detectors[st.target] = RampingDetector(frac)
            if self._h_eval is None:
                self._h_eval = self.net.sim.call_in(SECOND, self._evaluate)

    def _start_stream(self, st: _Stream) -> None:
        sim = self.net.sim
        self.streams[st.target] = st
        if st.initial_beam_us:
            self._beam(st, st.initial_beam_us)
        st.t0 = sim.now + st.initial_beam_us
        st.k = 0
        st.handle = sim.schedule(st.t0, self._tick, st)

    def _beam(self, st: _Stream, duration: int) -> None:
        beam = BeamFrame(st.target, home_id_hash(st.home_id), 20 if duration > 100 * MS else 8)
        self.net.channel.broadcast(beam, self.name, duration=duration)
        self.sent += 1
        self.net.sim.log.record(self.net.sim.now, self.name, "tx", f"0x{st.target:02x} Beam {duration}us")

    def _tick(self, st: _Stream) -> None:
        if not st.active:
            return
        sim = self.net.sim
        if st.beam_us:
            self._beam(st, st.beam_us)
            sim.call_in(st.beam_us, self._send, st, st.kinds[st.k % len(st.kinds)])
        else:
            self._send(st, st.kinds[st.k % len(st.kinds)])
        st.k += 1
        nxt = st.t0 + (st.k * SECOND * st.rate.denominator) // st.rate.numerator
        st.handle = sim.schedule(nxt, self._tick, st)

    def _send(self, st: _Stream, payload) -> None:
        if not st.active:
            return
        dest = st.target if st.dest is None else st.dest
        frame = MacFrame(st.home_id, st.source, dest, payload)
        self.net.channel.broadcast(frame, self.name)
        self.sent += 1
        self.sent_ids.add((st.home_id, st.source, dest))
        self.net.sim.log.record(self.net.sim.now, self.name, "tx",
                                f"0x{st.source:02x}->0x{dest:02x} {type(payload).__name__}")

    def _stop_stream(self, target: int) -> None:
        st = self.streams.get(target)
        if st is not None and st.active:
            st.active = False
            if st.handle is not None:
                st.handle.cancel()

    def stop(self) -> None:
        if self.finished:
            return
        self.finish_estimates()
        for t in list(self.streams):
            self._stop_stream(t)
        self.finished = True
        self.waiting = False
        if self._h_eval is not None:
            self._h_eval.cancel()
            self._h_eval = None
        self.net.sim.log.record(self.net.sim.now, self.name, "stop", "")

    # -- probing ---------------------------------------------------------------

    def _evaluate(self) -> None:
        now = self.net.sim.now
        self._h_eval = self.net.sim.call_in(SECOND, self._evaluate)
        for target, det in self.detectors.items():
            st = self.streams.get(target)
            if st is not None and st.active:
                det.evaluate(now)

    def observed_rate(self, target: int, now: int) -> int | None:
        det = self.detectors.get(target)
        return None if det is None else det.rate(now)

    def _confirmed(self, target: int) -> None:
        det = self.detectors[target]
        now = self.net.sim.now
        self.net.sim.log.record(now, self.name, "ramping",
                                f"0x{target:02x} after {det.time_to_ramping}us initial={det.initial_rate}")
        self.estimates.append(self._estimate(target, det, "ramping"))
        s = self.strategy
        if not isinstance(s, WeakestLinkProbe) or not s.stop_on_ramping:
            return
        self._stop_stream(target)
        if any(st.active for st in self.streams.values()):
            return
        if self.cycle < s.cycles:
            self.cycle += 1
            self.detectors.clear()
            self.net.sim.log.record(now, self.name, "rest", f"{s.rest}us")
            self.net.sim.schedule(now + s.rest, self._try_launch)
        else:
            self.stop()

    def _estimate(self, target: int, det: RampingDetector, status: str) -> BatteryEstimate:
        if status == "dead":
            ttr = 0 if det.hook_time is None else (det.drop_time or det.last_response) - det.hook_time
        else:
            ttr = det.time_to_ramping
        return BatteryEstimate(
            target=target,
            cycle=self.cycle,
            status=status,
            time_to_ramping=ttr,
            initial_rate=det.initial_rate,
            distance_m=self.net.channel.distance(self.name, f"0x{target:02x}")
            if f"0x{target:02x}" in self.net.channel.stations else float("nan"),
            hook_time=det.hook_time,
        )

    def finish_estimates(self) -> None:
        """Close out targets still under probe when the attack ends."""
        done = {(e.target, e.cycle) for e in self.estimates}
        for target, det in self.detectors.items():
            if (target, self.cycle) in done:
                continue
            if det.hook_time is None:
                status = "dead"
            elif det.drop_time is not None:
                status = "dead"
            else:
                status = "not_observed"
            self.estimates.append(self._estimate(target, det, status))

    def ranking(self, cycle: int | None = None) -> list[BatteryEstimate]:
        """Estimates ordered weakest first."""
        es = [e for e in self.estimates if cycle is None or e.cycle == cycle]
        return sorted(es, key=lambda e: (e.score, e.target))


def probe_weakest_link(attacker: Attacker, targets: tuple[int, ...] = ()) -> list[BatteryEstimate]:
    """Current ranking of ``targets`` (all probed targets if empty), weakest first."""
    rank = attacker.ranking()
    if targets:
        rank = [e for e in rank if e.target in targets]
    if not rank and not attacker.detectors:
        raise NoTargets("probe has not been launched")
    return rank
