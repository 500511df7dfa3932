from __future__ import annotations

import time

from zwavesim.presets import preset_text
from zwavesim.runner import Run, build, execute
from zwavesim.scenario import load_scenario

HOME = "0xC0FFEE01"


def scenario_text(*, duration="5min", devices=("contact",), attacker="", stimuli="",
                  device_extra="", controller_extra="", seed=1, sample="1s") -> str:
    """Small scenario: one controller at the origin, sensors 10 m away."""
    parts = [f"[scenario]\nseed = {seed}\nduration = {duration}\nsample_interval = {sample}\n",
             f"[controller]\nhome_id = {HOME}\nposition = 0,0\n{controller_extra}\n"]
    for i, kind in enumerate(devices):
        boot = "" if "boot_delay" in device_extra else f"boot_delay = {100 * (i + 1)}ms\n"
        parts.append(f"[device]\nnode_id = {5 + i}\nkind = {kind}\nposition = 10,{i}\n"
                     f"{boot}{device_extra}\n")
    if attacker:
        parts.append(f"[attacker]\n{attacker}\n")
    if stimuli:
        parts.append(stimuli)
    return "\n".join(parts)


def run_text(text: str, out_dir=None) -> Run:
    return execute(load_scenario(text), out_dir)


_RUNS: dict[tuple, tuple[Run, float]] = {}


def timed(name: str, **kw) -> tuple[Run, float]:
    """Run a preset once per session; return the run and its wall-clock time."""
    key = (name, tuple(sorted(kw.items())))
    if key not in _RUNS:
        t = time.perf_counter()
        run = execute(load_scenario(preset_text(name, **kw)))
        _RUNS[key] = (run, time.perf_counter() - t)
    return _RUNS[key]


def run_preset(name: str, **kw) -> Run:
    return timed(name, **kw)[0]


class Injector:
    """Bare transmitter used to put arbitrary frames on the air."""

    name = "injector"

    def can_receive(self, frame) -> bool:
        return False

    def receive(self, frame, distance) -> None:  # pragma: no cover
        pass


def rig(text: str, pos=(20.0, 0.0)):
    run = build(load_scenario(text))
    inj = Injector()
    run.net.channel.attach(inj, pos, 100.0)
    return run, inj


def flood(run, frame_fn, start, stop, period):
    t = start
    while t < stop:
        run.sim.schedule(t, lambda f=frame_fn(): run.net.channel.broadcast(f, "injector"))
        t += period


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
