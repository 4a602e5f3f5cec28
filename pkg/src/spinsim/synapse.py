"""Domain-wall MTJ synapse as a 1-D collective-coordinate model.

A write current in the heavy-metal plate under the free layer drives the wall
at v = mu_J J. The wall position q sets the parallel fraction q / L_t of the
free layer, hence the read conductance. Read and write paths are separate, so
reads do not move the wall.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .magneto import ShePlate, dw_plate, plate_resistance
from .transport import ConductancePair

MAX_WRITE_CURRENT = 200e-6  # A


@dataclass(frozen=True)
class DwTrackParams:
    length: float = 500e-9
    width: float = 100e-9
    fm_thickness: float = 1e-9
    plate: ShePlate = field(default_factory=dw_plate)
    mobility: float = 5e-10  # (m/s) per (A/m^2): 100 uA over 2 ns moves 250 nm
    pulse_duration: float = 2e-9
    # micromagnetic parameters behind the calibration, kept for provenance
    ms: float = 0.7e6
    ku: float = 0.8e6
    a_ex: float = 10e-12
    alpha: float = 0.3
    dmi: float = 1.2e-3

    def __post_init__(self):
        for name in ("length", "width", "fm_thickness", "mobility", "pulse_duration"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def current_density_per_amp(self) -> float:
        return 1.0 / (self.width * self.plate.thickness)

    @property
    def write_resistance(self) -> float:
        return plate_resistance(self.plate)


@dataclass(frozen=True)
class WritePulse:
    amplitude: float  # A, sign sets the direction of motion
    duration: float  # s

    def __post_init__(self):
        if abs(self.amplitude) > MAX_WRITE_CURRENT * (1 + 1e-12):
            raise ValueError(f"|I_w| = {abs(self.amplitude):.3e} A exceeds {MAX_WRITE_CURRENT:.0e} A")
        if self.duration <= 0:
            raise ValueError("pulse duration must be positive")


@dataclass(frozen=True)
class DwSynapse:
    q: float  # wall position from the antiparallel end, m
    pair: ConductancePair
    length: float = 500e-9

    def __post_init__(self):
        if not 0.0 <= self.q <= self.length:
            raise ValueError("wall position outside the track")

    @property
    def parallel_fraction(self) -> float:
        return self.q / self.length

    @classmethod
    def centered(cls, pair: ConductancePair, p: DwTrackParams | None = None) -> "DwSynapse":
        p = p or DwTrackParams()
        return cls(p.length / 2.0, pair, p.length)


def dw_velocity(p: DwTrackParams, i_w) -> np.ndarray | float:
    v = p.mobility * p.current_density_per_amp * np.asarray(i_w, dtype=float)
    return float(v) if np.ndim(v) == 0 else v


def apply_pulse(s: DwSynapse, p: DwTrackParams, pulse: WritePulse) -> DwSynapse:
    q = s.q + dw_velocity(p, pulse.amplitude) * pulse.duration
    return replace(s, q=min(max(q, 0.0), p.length))


def read_conductance(s: DwSynapse, pair: ConductancePair | None = None) -> float:
    pair = pair or s.pair
    f = s.parallel_fraction
    return pair.g_p * f + pair.g_ap * (1.0 - f)


def write_energy(pulse: WritePulse, p: DwTrackParams) -> float:
    return pulse.amplitude**2 * p.write_resistance * pulse.duration


def program_pulse_for(
    s: DwSynapse, p: DwTrackParams, delta_g: float, pair: ConductancePair | None = None
) -> tuple[WritePulse, bool]:
    """Fixed-duration pulse that changes G by ``delta_g``.

    Returns ``(pulse, saturated)``; when the target lies beyond the track ends
    or needs more than the current limit, the pulse saturates and the flag is set.
    """
    pair = pair or s.pair
    g = read_conductance(s, pair)
    span = pair.g_p - pair.g_ap
    reach = float(np.clip(delta_g, pair.g_ap - g, pair.g_p - g))
    saturated = reach != delta_g
    per_amp = span / p.length * p.mobility * p.current_density_per_amp * p.pulse_duration
    amp = reach / per_amp
    if abs(amp) > MAX_WRITE_CURRENT:
        amp = float(np.sign(amp)) * MAX_WRITE_CURRENT
        saturated = True
    return WritePulse(amp, p.pulse_duration), saturated


@dataclass
class PulseTrace:
    t: np.ndarray  # s
    q: np.ndarray  # m
    g: np.ndarray  # S
    energy: float  # J


def run_pulse_train(
    s: DwSynapse, p: DwTrackParams, pulses: list[WritePulse], samples_per_pulse: int = 20
) -> PulseTrace:
    """Wall position and conductance sampled through a pulse train."""
    ts, qs, gs = [0.0], [s.q], [read_conductance(s)]
    t, energy = 0.0, 0.0
    for pulse in pulses:
        sub = WritePulse(pulse.amplitude, pulse.duration / samples_per_pulse)
        for _ in range(samples_per_pulse):
            s = apply_pulse(s, p, sub)
            t += sub.duration
            ts.append(t)
            qs.append(s.q)
            gs.append(read_conductance(s))
        energy += write_energy(pulse, p)
    return PulseTrace(np.asarray(ts), np.asarray(qs), np.asarray(gs), energy)
