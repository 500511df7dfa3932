"""Discrete-event simulator of battery-depletion attacks on Z-Wave sensors."""

from __future__ import annotations

from .battery import Battery, BatteryParams
from .frames import BeamFrame, FrameError, MacFrame, decode, encode
from .runner import RunReport, execute
from .scenario import ParseError, Scenario, ValidationError, load_scenario
from .sim import InvariantViolation, RadioChannel, Simulator

__all__ = [
    "Battery", "BatteryParams", "BeamFrame", "FrameError", "MacFrame", "decode", "encode",
    "RunReport", "execute", "ParseError", "Scenario", "ValidationError", "load_scenario",
    "InvariantViolation", "RadioChannel", "Simulator",
]
__version__ = "0.1.0"
