"""Two-well kinetic battery with ohmic and polarization voltage drops.

Charge lives in an *available* well that feeds the load and a *bound* well
that refills it by first-order diffusion (the Manwell-McGowan kinetic
battery model).  Terminal voltage is

    V = Voc(h_avail) - I * R_int(soc) - V_pol

where ``h_avail`` is the fill fraction of the available well, ``R_int`` grows
as the cell empties and ``V_pol`` is a first-order RC polarization branch
with a time constant of a few seconds.  The diffusion relaxes over tens of
minutes, the polarization over seconds; together they give both the
seconds-scale shutdown/recovery cycles seen under sustained load and the
slow recovery after hours of rest.

Charge drawn from the wells is the load current scaled by a rated-current
(Peukert-style) factor, so currents far above the cell's rated drain empty
it faster than their nominal value.

Currents are in mA, charge in mAh, time in seconds.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace

SECONDS_PER_HOUR = 3600.0


def _interp(points: tuple[tuple[float, float], ...], x: float) -> float:
    xs = [p[0] for p in points]
    if x <= xs[0]:
        return points[0][1]
    if x >= xs[-1]:
        return points[-1][1]
    i = bisect.bisect_right(xs, x)
    (x0, y0), (x1, y1) = points[i - 1], points[i]
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0)


@dataclass(frozen=True)
class BatteryParams:
    """Static battery configuration.

    Defaults are calibrated for the contact-sensor pack (two 235 mAh coin
    cells) so that a continuous 35 mW load dies in about 16 hours and starts
    to brown out about halfway through.
    """

    capacity_mah: float = 470.0
    capacity_ratio: float = 0.5
    diffusion_rate: float = 1.0 / 1800.0
    # (available-well fill fraction, open-circuit volts), ascending
    ocv_curve: tuple[tuple[float, float], ...] = (
        (0.0, 1.5),
        (0.40, 2.0),
        (0.41, 2.04),
        (1.0, 2.9),
    )
    # (state of charge, ohms), ascending soc; resistance falls as soc rises
    resistance_curve: tuple[tuple[float, float], ...] = (
        (0.0, 22.0),
        (0.5, 14.0),
        (1.0, 10.0),
    )
    polarization_resistance: float = 15.0
    polarization_time_constant: float = 4.0
    rated_current_ma: float = 0.2
    peukert_exponent: float = 1.25
    cutoff_voltage: float = 1.7
    recovery_voltage: float = 2.0

    def __post_init__(self) -> None:
        if self.capacity_mah <= 0:
            raise ValueError(f"capacity_mah must be positive, got {self.capacity_mah}")
        if not 0.0 < self.capacity_ratio < 1.0:
            raise ValueError(f"capacity_ratio must be in (0, 1), got {self.capacity_ratio}")
        if self.diffusion_rate <= 0:
            raise ValueError(f"diffusion_rate must be positive, got {self.diffusion_rate}")
        if self.polarization_time_constant <= 0:
            raise ValueError("polarization_time_constant must be positive")
        if self.peukert_exponent < 1.0:
            raise ValueError("peukert_exponent must be >= 1")
        if self.recovery_voltage <= self.cutoff_voltage:
            raise ValueError("recovery_voltage must exceed cutoff_voltage")
        for name in ("ocv_curve", "resistance_curve"):
            pts = getattr(self, name)
            if len(pts) < 2 or any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
                raise ValueError(f"{name} needs >= 2 points with strictly ascending x")
        ocv = [v for _, v in self.ocv_curve]
        if any(b < a for a, b in zip(ocv, ocv[1:])):
            raise ValueError("ocv_curve must be non-decreasing")
        res = [r for _, r in self.resistance_curve]
        if any(b > a for a, b in zip(res, res[1:])) or min(res) < 0:
            raise ValueError("resistance_curve must be non-negative and non-increasing in soc")

    def open_circuit_voltage(self, fill: float) -> float:
        return _interp(self.ocv_curve, fill)

    def internal_resistance(self, soc: float) -> float:
        return _interp(self.resistance_curve, soc)

    def effective_current(self, load_ma: float) -> float:
        """Current actually removed from the wells for a given load current."""
        if load_ma <= 0.0:
            return 0.0
        ratio = load_ma / self.rated_current_ma
        if ratio <= 1.0 or self.peukert_exponent == 1.0:
            return load_ma
        return load_ma * ratio ** (self.peukert_exponent - 1.0)


@dataclass
class Battery:
    """Mutable battery state.

    ``available`` and ``bound`` are in mAh, ``polarization`` in volts.
    """

    params: BatteryParams = field(default_factory=BatteryParams)
    available: float = 0.0
    bound: float = 0.0
    polarization: float = 0.0

    @classmethod
    def at_soc(cls, params: BatteryParams | None = None, soc: float = 1.0) -> "Battery":
        """Fresh battery at rest with both wells at the same fill level."""
        params = params or BatteryParams()
        if not 0.0 <= soc <= 1.0:
            raise ValueError(f"soc must be within [0, 1], got {soc}")
        q = soc * params.capacity_mah
        c = params.capacity_ratio
        return cls(params=params, available=c * q, bound=(1.0 - c) * q)

    def copy(self) -> "Battery":
        return replace(self)

    # -- derived quantities ------------------------------------------------

    @property
    def charge(self) -> float:
        return self.available + self.bound

    @property
    def soc(self) -> float:
        return self.charge / self.params.capacity_mah

    @property
    def available_fill(self) -> float:
        p = self.params
        return self.available / (p.capacity_ratio * p.capacity_mah)

    def open_circuit_voltage(self) -> float:
        """Voltage with no load and no polarization (fully rested value of the well)."""
        return self.params.open_circuit_voltage(self.available_fill)

    def rest_voltage(self) -> float:
        """Voltage the cell would settle to after an unlimited rest."""
        return self.params.open_circuit_voltage(self.soc)

    def voltage(self, load_ma: float = 0.0) -> float:
        if load_ma < 0:
            raise ValueError("load current must be non-negative")
        p = self.params
        return (
            p.open_circuit_voltage(self.available_fill)
            - load_ma * 1e-3 * p.internal_resistance(self.soc)
            - self.polarization
        )

    # -- time evolution ----------------------------------------------------

    def _evolve(self, load_ma: float, dt: float) -> tuple[float, float, float]:
        p = self.params
        q1, q2 = self.available, self.bound
        vp = self.polarization
        if dt <= 0.0:
            return q1, q2, vp
        k = p.diffusion_rate
        c = p.capacity_ratio
        i = p.effective_current(load_ma) / SECONDS_PER_HOUR  # mAh per second
        q0 = q1 + q2
        r = math.exp(-k * dt)
        term = k * dt - 1.0 + r
        n1 = q1 * r + ((q0 * k * c - i) * (1.0 - r) - i * c * term) / k
        n2 = q2 * r + q0 * (1.0 - c) * (1.0 - r) - i * (1.0 - c) * term / k
        if n1 < 0.0:
            # available well emptied; whatever is left sits in the bound well
            n2 = max(0.0, n1 + n2)
            n1 = 0.0
        v_ss = load_ma * 1e-3 * p.polarization_resistance
        nvp = v_ss + (vp - v_ss) * math.exp(-dt / p.polarization_time_constant)
        return n1, max(0.0, n2), nvp

    def advance(self, load_ma: float, dt: float) -> float:
        """Draw ``load_ma`` for ``dt`` seconds; return mAh removed from the wells."""
        if load_ma < 0:
            raise ValueError("load current must be non-negative")
        before = self.charge
        self.available, self.bound, self.polarization = self._evolve(load_ma, dt)
        return before - self.charge

    def peek(self, load_ma: float, dt: float) -> "Battery":
        """State after ``dt`` seconds of ``load_ma`` without mutating ``self``."""
        q1, q2, vp = self._evolve(load_ma, dt)
        return Battery(self.params, q1, q2, vp)

    def voltage_after(self, load_ma: float, dt: float) -> float:
        return self.peek(load_ma, dt).voltage(load_ma)

    def time_to_cutoff(self, load_ma: float, horizon: float) -> float | None:
        """Seconds until the loaded voltage first falls below cutoff.

        Scans forward on a doubling grid (capped at 5 s per step) and then
        bisects the bracketing interval.  Returns 0.0 if already below and
        None if no crossing happens within ``horizon``.
        """
        cutoff = self.params.cutoff_voltage
        if self.voltage(load_ma) < cutoff:
            return 0.0
        if self._voltage_floor(load_ma, horizon) >= cutoff:
            return None
        lo, step = 0.0, 0.01
        while lo < horizon:
            hi = min(lo + step, horizon)
            if self.voltage_after(load_ma, hi) < cutoff:
                return self._bisect(load_ma, lo, hi, lambda v: v < cutoff)
            lo = hi
            step = min(step * 2.0, 5.0)
        return None

    def _voltage_floor(self, load_ma: float, horizon: float) -> float:
        """Lower bound on the loaded voltage over the next ``horizon`` seconds.

        Diffusion only ever refills the available well, so draining it with
        no diffusion at all bounds the fill from below.
        """
        p = self.params
        drawn = p.effective_current(load_ma) * horizon / SECONDS_PER_HOUR
        fill = max(0.0, self.available - drawn) / (p.capacity_ratio * p.capacity_mah)
        soc = max(0.0, self.charge - drawn) / p.capacity_mah
        vp = max(self.polarization, load_ma * 1e-3 * p.polarization_resistance)
        return p.open_circuit_voltage(fill) - load_ma * 1e-3 * p.internal_resistance(soc) - vp

    def time_to_recovery(self, horizon: float) -> float | None:
        """Seconds of rest until the unloaded voltage reaches recovery.

        Resting voltage rises monotonically, so a single bisection suffices.
        Returns None if it cannot happen within ``horizon`` (or ever).
        """
        target = self.params.recovery_voltage
        if self.voltage(0.0) >= target:
            return 0.0
        if self.rest_voltage() < target:
            return None
        if self.voltage_after(0.0, horizon) < target:
            return None
        return self._bisect(0.0, 0.0, horizon, lambda v: v >= target)

    def _bisect(self, load_ma, lo, hi, done) -> float:
        for _ in range(60):
            if hi - lo < 1e-7:
                break
            mid = 0.5 * (lo + hi)
            if done(self.voltage_after(load_ma, mid)):
                hi = mid
            else:
                lo = mid
        return hi
