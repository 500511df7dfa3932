"""Countermeasures attachable to sensors and the controller.

``MeaningfulPacketTimeout`` forces a device back to deep sleep once it has
been awake too long without receiving an encrypted frame.
``SpoofDetection`` raises an alert when a node overhears a frame that claims
to come from its own node id.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .frames import MacFrame, requires_encryption
from .sim import MINUTE, SECOND


class AlertCause(str, Enum):
    SPOOFED_SOURCE_ID = "SpoofedSourceId"
    FORCED_AWAKE_TIMEOUT = "ForcedAwakeTimeout"


@dataclass(frozen=True)
class AlertUser:
    pass


@dataclass(frozen=True)
class SuspiciousState:
    distrust_duration: int = 30 * SECOND

    def __post_init__(self) -> None:
        if self.distrust_duration <= 0:
            raise ValueError("distrust_duration must be positive")


@dataclass(frozen=True)
class MeaningfulPacketTimeout:
    max_awake_without_meaningful: int = 3 * SECOND

    def __post_init__(self) -> None:
        if self.max_awake_without_meaningful <= 0:
            raise ValueError("max_awake_without_meaningful must be positive")


@dataclass(frozen=True)
class SpoofDetection:
    action: Union[AlertUser, SuspiciousState] = field(default_factory=AlertUser)


DefensePolicy = Union[MeaningfulPacketTimeout, SpoofDetection]


@dataclass(frozen=True)
class SecurityAlert:
    time: int
    node: str
    cause: AlertCause
    detail: str = ""


@dataclass
class AlertBook:
    """Run-wide alert sink with a per-node, per-cause cooldown."""

    cooldown: int = 60 * SECOND
    alerts: list[SecurityAlert] = field(default_factory=list)
    _last: dict[tuple[str, AlertCause], int] = field(default_factory=dict)

    def raise_alert(self, now: int, node: str, cause: AlertCause, detail: str = "") -> SecurityAlert | None:
        key = (node, cause)
        last = self._last.get(key)
        if last is not None and now - last < self.cooldown:
            return None
        self._last[key] = now
        alert = SecurityAlert(now, node, cause, detail)
        self.alerts.append(alert)
        return alert

    def count(self, cause: AlertCause | None = None) -> int:
        return sum(1 for a in self.alerts if cause is None or a.cause == cause)


def validate_policies(policies: tuple[DefensePolicy, ...], idle_timeout: int) -> None:
    for p in policies:
        if isinstance(p, MeaningfulPacketTimeout) and p.max_awake_without_meaningful <= idle_timeout:
            raise ValueError(
                "max_awake_without_meaningful must exceed the awake idle timeout "
                f"({p.max_awake_without_meaningful} <= {idle_timeout} us)"
            )


def timeout_policy(policies: tuple[DefensePolicy, ...]) -> MeaningfulPacketTimeout | None:
    for p in policies:
        if isinstance(p, MeaningfulPacketTimeout):
            return p
    return None


def spoof_policy(policies: tuple[DefensePolicy, ...]) -> SpoofDetection | None:
    for p in policies:
        if isinstance(p, SpoofDetection):
            return p
    return None


def forced_sleep_deadline(policy: MeaningfulPacketTimeout, awake_since: int,
                          last_meaningful_rx: int | None) -> int:
    """Time at which an awake device must be sent back to sleep."""
    ref = awake_since if last_meaningful_rx is None else max(awake_since, last_meaningful_rx)
    return ref + policy.max_awake_without_meaningful


def apply_meaningful_timeout(device, now: int) -> bool:
    """Force ``device`` to deep sleep if its meaningful-packet deadline passed.

    ``device`` needs ``defenses``, ``is_awake``, ``awake_since``,
    ``last_meaningful_rx`` and ``force_sleep(now)``.  Returns True if the
    device was put to sleep.
    """
    policy = timeout_policy(device.defenses)
    if policy is None or not device.is_awake:
        return False
    if now < forced_sleep_deadline(policy, device.awake_since, device.last_meaningful_rx):
        return False
    device.force_sleep(now)
    return True


def is_spoofed(node_id: int, home_id: int, frame: MacFrame) -> bool:
    return frame.source_id == node_id and frame.home_id == home_id


def apply_spoof_detection(device, frame: MacFrame, now: int) -> SecurityAlert | None:
    """Raise a spoofed-source alert if ``frame`` claims ``device``'s own id.

    ``device`` needs ``defenses``, ``node_id``, ``home_id``, ``name`` and
    ``alerts`` (an :class:`AlertBook`).  Under :class:`SuspiciousState` the
    device's ``distrust_until`` is pushed forward even while the alert itself
    is in cooldown.
    """
    policy = spoof_policy(device.defenses)
    if policy is None or not is_spoofed(device.node_id, device.home_id, frame):
        return None
    if isinstance(policy.action, SuspiciousState):
        device.distrust_until = max(device.distrust_until, now + policy.action.distrust_duration)
    summary = f"src=0x{frame.source_id:02x} dst=0x{frame.dest_id:02x} {type(frame.payload).__name__}"
    return device.alerts.raise_alert(now, device.name, AlertCause.SPOOFED_SOURCE_ID, summary)


def distrusts(device, frame: MacFrame, now: int) -> bool:
    """True if ``device`` is in a suspicious state and ``frame`` is not encrypted."""
    return now < device.distrust_until and not requires_encryption(frame.payload)


DEFAULT_ALERT_COOLDOWN = MINUTE
