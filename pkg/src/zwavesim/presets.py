"""Ready-made attack scenarios and attack-free controls.

Each preset is a function returning scenario text, so the files can be
inspected, saved and edited like any hand-written scenario.
"""

from __future__ import annotations

from typing import Callable

HOME_ID = "0xC0FFEE01"

_CONTROLLER = f"""
[controller]
home_id = {HOME_ID}
position = 0,0
range = 100
spoof_detection = true
"""


def fig6_contact(pps: float = 10) -> str:
    """Contact sensor 40 m from the attacker; the door is opened once to hook it."""
    return f"""
[scenario]
name = fig6_contact_{pps:g}pps
seed = 6
duration = 20min
{_CONTROLLER}
[device]
node_id = 0x05
kind = contact
position = 10,0
boot_delay = 100ms
spoof_detection = alert

[attacker]
strategy = drain_wakeup_interval
target = 0x05
pps = {pps:g}
position = 50,0
start = 5min

[stimulus]
time = 301s
target = 0x05
kind = door_open
"""


def fig6_motion(pps: float = 10) -> str:
    """Motion sensor (FLiRS) 10 m from the attacker, woken by a long beam."""
    return f"""
[scenario]
name = fig6_motion_{pps:g}pps
seed = 7
duration = 20min
{_CONTROLLER}
[device]
node_id = 0x07
kind = motion
position = 10,0
boot_delay = 100ms
spoof_detection = alert

[attacker]
strategy = drain_flirs
target = 0x07
pps = {pps:g}
position = 20,0
start = 5min
"""


def fig7_drain(pps: float = 10, duration: str = "20h") -> str:
    """Fresh contact sensor drained at 10 PPS, hooked at its first heartbeat."""
    return f"""
[scenario]
name = fig7_drain
seed = 16
duration = {duration}
sample_interval = 1s
{_CONTROLLER}
[device]
node_id = 0x05
kind = contact
position = 10,0
boot_delay = 100ms
spoof_detection = alert

[attacker]
strategy = drain_wakeup_interval
target = 0x05
pps = {pps:g}
position = 50,0
start = 60s
"""


def fig8(soc: float = 0.46, cycles: int = 4, rest: str = "3h") -> str:
    """Back-to-back probe runs with rests in between, each starting lower."""
    return f"""
[scenario]
name = fig8
seed = 8
duration = 16h
sample_interval = 10s
{_CONTROLLER}
[device]
node_id = 0x05
kind = contact
position = 10,0
soc = {soc:g}

[attacker]
strategy = probe
targets = 0x05
pps = 10
stop_on_ramping = true
cycles = {cycles}
rest = {rest}
position = 50,0
start = 500ms
home_id = {HOME_ID}
known_nodes = 0x01,0x05
"""


def probe_soc(soc: float = 1.0) -> str:
    """Single probe run on a rested battery at the given state of charge."""
    return f"""
[scenario]
name = probe_soc_{soc:g}
seed = 9
duration = 12h
sample_interval = 10s
{_CONTROLLER}
[device]
node_id = 0x05
kind = contact
position = 10,0
soc = {soc:g}

[attacker]
strategy = probe
targets = 0x05
pps = 10
stop_on_ramping = true
position = 50,0
start = 500ms
home_id = {HOME_ID}
known_nodes = 0x01,0x05
"""


def weakest_link(socs: tuple[float, float] = (0.9, 0.4)) -> str:
    """Two contact sensors probed at once; the first to ramp is the weakest."""
    return f"""
[scenario]
name = weakest_link
seed = 10
duration = 12h
sample_interval = 10s
{_CONTROLLER}
[device]
node_id = 0x05
kind = contact
position = 10,0
soc = {socs[0]:g}

[device]
node_id = 0x06
kind = contact
position = 10,10
boot_delay = 100ms
soc = {socs[1]:g}

[attacker]
strategy = probe
pps = 10
stop_on_ramping = true
position = 45,5
start = 500ms
home_id = {HOME_ID}
known_nodes = 0x01,0x05,0x06
"""


def dos_controller(alter_home_id: bool = False, distance: float = 100.0) -> str:
    """Flood the controller with spoofed frames while a door is opened every 20 s."""
    name = "dos_controller" + ("_foreign" if alter_home_id else "") + (
        "" if distance == 100.0 else f"_{distance:g}m")
    return f"""
[scenario]
name = {name}
seed = 51
duration = 15min
{_CONTROLLER}
[device]
node_id = 0x05
kind = contact
position = 70,0
boot_delay = 100ms
spoof_detection = alert

[attacker]
strategy = dos_controller
pps = 50
alter_home_id = {str(alter_home_id).lower()}
position = {distance:g},0
start = 5min
stop = 10min

[stimulus]
time = 30s
every = 20s
count = 44
target = 0x05
kind = door_open
"""


def dos_motion(msg_rate: float = 80) -> str:
    """Beam keep-awake plus a message flood against a motion sensor."""
    return f"""
[scenario]
name = dos_motion_{msg_rate:g}
seed = 52
duration = 15min
{_CONTROLLER}
[device]
node_id = 0x07
kind = motion
position = 10,0
boot_delay = 100ms
spoof_detection = alert

[attacker]
strategy = dos_motion
target = 0x07
msg_rate = {msg_rate:g}
position = 20,0
start = 5min
stop = 10min

[stimulus]
time = 30s
every = 10s
count = 84
target = 0x07
kind = motion
"""


def dos_contact() -> str:
    """Drain a half-empty contact sensor into ramping and keep opening the door."""
    return f"""
[scenario]
name = dos_contact
seed = 53
duration = 3h
sample_interval = 1s
{_CONTROLLER}
[device]
node_id = 0x05
kind = contact
position = 10,0
soc = 0.45
boot_delay = 100ms
spoof_detection = alert

[attacker]
strategy = drain_wakeup_interval
target = 0x05
pps = 10
position = 50,0
start = 60s

[stimulus]
time = 90s
every = 7s
count = 1500
target = 0x05
kind = door_open
"""


def defended_drain(duration: str = "24h") -> str:
    """The 10 PPS drain against a sensor running both countermeasures."""
    return f"""
[scenario]
name = defended_drain
seed = 60
duration = {duration}
sample_interval = 10s
{_CONTROLLER}
[device]
node_id = 0x05
kind = contact
position = 10,0
boot_delay = 100ms
meaningful_timeout = 3s
spoof_detection = alert

[attacker]
strategy = drain_wakeup_interval
target = 0x05
pps = 10
position = 50,0
start = 60s
"""


def attack_free(duration: str = "24h") -> str:
    """Normal household traffic with every defense enabled and no attacker."""
    return f"""
[scenario]
name = attack_free
seed = 70
duration = {duration}
sample_interval = 10s

[controller]
home_id = {HOME_ID}
position = 0,0
range = 100
spoof_detection = true
poll_interval = 10min

[device]
node_id = 0x05
kind = contact
position = 10,0
boot_delay = 100ms
meaningful_timeout = 3s
spoof_detection = alert

[device]
node_id = 0x07
kind = motion
position = 0,12
boot_delay = 200ms
meaningful_timeout = 3s
spoof_detection = alert

[stimulus]
time = 10min
every = 30min
count = 47
target = 0x05
kind = door_open

[stimulus]
time = 7min
every = 17min
count = 84
target = 0x07
kind = motion
"""


PRESETS: dict[str, Callable[[], str]] = {
    "fig6_contact": fig6_contact,
    "fig6_motion": fig6_motion,
    "fig7_drain": fig7_drain,
    "fig_drain": fig7_drain,
    "fig8": fig8,
    "probe_soc": probe_soc,
    "weakest_link": weakest_link,
    "dos_controller": dos_controller,
    "dos_controller_foreign": lambda: dos_controller(alter_home_id=True),
    "dos_controller_101m": lambda: dos_controller(distance=101.0),
    "dos_motion": dos_motion,
    "dos_motion_79": lambda: dos_motion(79),
    "dos_contact": dos_contact,
    "defended_drain": defended_drain,
    "attack_free": attack_free,
}

# presets whose attacker impersonates a node of the network
IMPERSONATING = ("fig6_contact", "fig6_motion", "fig7_drain", "fig8", "probe_soc", "weakest_link",
                 "dos_controller", "dos_motion", "dos_contact", "defended_drain")
ATTACK_FREE = ("attack_free",)


def preset_text(name: str, **kw) -> str:
    try:
        fn = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None
    return fn(**kw).lstrip()
