"""Virtual-clock event loop and range-gated broadcast channel.

Time is an integer number of microseconds.  Events are ordered by
``(fire_at, insertion sequence)`` so equal-time events run in the order they
were scheduled, which keeps every run reproducible.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, TextIO

from .frames import SOF, BeamFrame, MacFrame

US = 1
MS = 1_000
SECOND = 1_000_000
MINUTE = 60 * SECOND
HOUR = 60 * MINUTE

BITRATE = 40_000  # bit/s


class SchedulingInPast(ValueError):
    pass


class InvariantViolation(RuntimeError):
    """A model invariant was broken during a run."""


def us_to_s(t: int) -> float:
    return t / SECOND


def s_to_us(t: float) -> int:
    return int(round(t * SECOND))


class Handle:
    """Scheduled callback; ``cancel()`` prevents it from firing."""

    __slots__ = ("fire_at", "callback", "args", "cancelled")

    def __init__(self, fire_at: int, callback: Callable[..., Any], args: tuple):
        self.fire_at = fire_at
        self.callback = callback
        self.args = args
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class EventLog:
    """Append-only ``time node kind detail`` records with a running digest."""

    def __init__(self, stream: TextIO | None = None):
        self._hash = hashlib.sha256()
        self._stream = stream
        self.count = 0

    def record(self, t: int, node: str, kind: str, detail: str = "") -> None:
        line = f"{t}\t{node}\t{kind}\t{detail}\n"
        self._hash.update(line.encode())
        if self._stream is not None:
            self._stream.write(line)
        self.count += 1

    def hexdigest(self) -> str:
        return self._hash.hexdigest()


class Simulator:
    def __init__(self, log: EventLog | None = None):
        self.now = 0
        self._queue: list[tuple[int, int, Handle]] = []
        self._seq = 0
        self.log = log or EventLog()
        self.processed = 0

    def schedule(self, fire_at: int, callback: Callable[..., Any], *args: Any) -> Handle:
        fire_at = int(fire_at)
        if fire_at < self.now:
            raise SchedulingInPast(f"fire_at {fire_at} is before now {self.now}")
        h = Handle(fire_at, callback, args)
        heapq.heappush(self._queue, (fire_at, self._seq, h))
        self._seq += 1
        return h

    def call_in(self, delay: int, callback: Callable[..., Any], *args: Any) -> Handle:
        return self.schedule(self.now + int(delay), callback, *args)

    def pending(self) -> int:
        return sum(1 for _, _, h in self._queue if not h.cancelled)

    def run_until(self, t_end: int) -> int:
        t_end = int(t_end)
        if t_end < self.now:
            raise SchedulingInPast(f"t_end {t_end} is before now {self.now}")
        q = self._queue
        pop = heapq.heappop
        n = 0
        while q and q[0][0] <= t_end:
            t, _, h = pop(q)
            if h.cancelled:
                continue
            if t < self.now:
                raise InvariantViolation(f"event at {t} processed after clock reached {self.now}")
            self.now = t
            h.callback(*h.args)
            n += 1
        self.now = t_end
        self.processed += n
        return n


# -- radio -------------------------------------------------------------------


class Receiver(Protocol):
    name: str

    def can_receive(self, frame: MacFrame | BeamFrame) -> bool: ...

    def receive(self, frame: MacFrame | BeamFrame, distance: float) -> None: ...


@dataclass
class _Station:
    node: Any
    position: tuple[float, float]
    reception_range: float
    sniffer: bool = False


@dataclass
class BeamTrain:
    beam: BeamFrame
    tx: str
    start: int
    end: int


def airtime_us(n_bytes: int) -> int:
    return n_bytes * 8 * SECOND // BITRATE


@dataclass
class RadioChannel:
    """Single-hop broadcast medium with a hard per-receiver range cutoff.

    Collisions are not modelled; overlapping transmissions all arrive.
    """

    sim: Simulator
    stations: dict[str, _Station] = field(default_factory=dict)
    beams: list[BeamTrain] = field(default_factory=list)
    deliveries: dict[str, int] = field(default_factory=dict)
    _neighbours: dict[str, list[tuple[_Station, float]]] = field(default_factory=dict)

    def attach(self, node: Any, position: tuple[float, float], reception_range: float,
               sniffer: bool = False) -> None:
        if node.name in self.stations:
            raise ValueError(f"node {node.name} already attached")
        if reception_range < 0:
            raise ValueError("reception range must be non-negative")
        self.stations[node.name] = _Station(node, (float(position[0]), float(position[1])),
                                            float(reception_range), sniffer)
        self.deliveries.setdefault(node.name, 0)
        self._neighbours.clear()

    def distance(self, a: str, b: str) -> float:
        pa, pb = self.stations[a].position, self.stations[b].position
        return math.hypot(pa[0] - pb[0], pa[1] - pb[1])

    def in_range(self, tx: str, rx: str) -> bool:
        return self.distance(tx, rx) <= self.stations[rx].reception_range

    def _hearers(self, tx: str) -> list[tuple[_Station, float]]:
        hs = self._neighbours.get(tx)
        if hs is None:
            hs = []
            for name, st in self.stations.items():
                if name == tx:
                    continue
                d = self.distance(tx, name)
                if d <= st.reception_range:
                    hs.append((st, d))
            self._neighbours[tx] = hs
        return hs

    @staticmethod
    def frame_airtime(frame: MacFrame) -> int:
        return airtime_us(len(SOF) + frame.length)

    def broadcast(self, frame: MacFrame | BeamFrame, tx: str, delay: int = 0,
                  duration: int | None = None) -> list[str]:
        """Transmit ``frame`` from ``tx`` starting ``delay`` µs from now.

        MAC frames arrive after their airtime.  Beams arrive at the start of
        the train (a listening FLiRS radio detects the preamble at once);
        ``duration`` sets the train length.  Receivers are gated on their
        radio state at the moment of the call.
        """
        start = self.sim.now + delay
        if isinstance(frame, BeamFrame):
            length = duration if duration is not None else airtime_us(frame.total_length)
            train = BeamTrain(frame, tx, start, start + length)
            self.beams = [b for b in self.beams if b.end > self.sim.now]
            self.beams.append(train)
            arrive = start
        else:
            length = duration if duration is not None else self.frame_airtime(frame)
            arrive = start + length
        rx = [(st, d) for st, d in self._hearers(tx) if st.node.can_receive(frame)]
        names = [st.node.name for st, _ in rx]
        if rx:
            self.sim.schedule(arrive, self._deliver, frame, rx)
        return names

    def _deliver(self, frame: MacFrame | BeamFrame, rx: list[tuple[_Station, float]]) -> None:
        for st, d in rx:
            self.deliveries[st.node.name] += 1
            st.node.receive(frame, d)

    def active_beams(self, rx: str, now: int) -> list[BeamTrain]:
        """Beam trains on the air at ``now`` that ``rx`` is in range of."""
        return [b for b in self.beams if b.start <= now < b.end and self.in_range(b.tx, rx)]
