"""Macrospin LLGS dynamics driven by spin-Hall spin current.

Dynamics are integrated in reduced time ``tau = gamma mu0 H_k t / (1 + alpha^2)``
with the normalized field ``h = H / H_k``. Thermal noise enters as a random
field frozen over each step (stochastic Heun, Stratonovich). State arrays are
kept component-wise, shape ``(3, n)``, so whole Monte-Carlo ensembles advance
in one vectorized step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .constants import GAMMA, HBAR, K_B, MU_0, Q_E, emu_cc_to_a_per_m, oe_to_a_per_m
from .numerics import IntegrationError

SpinCurrent = Union[np.ndarray, Callable[[float], np.ndarray]]


@dataclass(frozen=True)
class MacrospinParams:
    ms: float  # A/m
    hk: float  # A/m
    alpha: float
    volume: float  # m^3
    temperature: float = 300.0
    easy_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.ms <= 0 or self.hk <= 0 or self.volume <= 0:
            raise ValueError("M_s, H_k and V must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        n = np.asarray(self.easy_axis, dtype=float)
        if not math.isclose(float(np.linalg.norm(n)), 1.0, rel_tol=1e-9):
            raise ValueError("easy axis must be a unit vector")

    @classmethod
    def from_cgs(cls, ms_emu_cc: float, hk_oe: float, alpha: float, volume: float, temperature: float = 300.0):
        return cls(emu_cc_to_a_per_m(ms_emu_cc), oe_to_a_per_m(hk_oe), alpha, volume, temperature)

    @property
    def time_scale(self) -> float:
        """Seconds per unit of reduced time."""
        return (1.0 + self.alpha**2) / (GAMMA * MU_0 * self.hk)

    @property
    def anisotropy_energy(self) -> float:
        """mu0 M_s V H_k in joules."""
        return MU_0 * self.ms * self.volume * self.hk


def relu_magnet(hk_oe: float = 330.0, temperature: float = 300.0) -> MacrospinParams:
    """PMA CoFeB free layer of the activation cell, 14.4 x 69.4 x 1 nm."""
    return MacrospinParams.from_cgs(1150.0, hk_oe, 0.01, 14.4e-9 * 69.4e-9 * 1e-9, temperature)


DELTA_VARIANTS_OE = {4.58: 330.0, 30.26: 2180.0, 45.81: 3300.0}


@dataclass(frozen=True)
class ShePlate:
    theta_sh: float
    rho: float  # ohm m
    length: float
    width: float
    thickness: float
    current_dir: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if min(self.theta_sh, self.rho, self.length, self.width, self.thickness) <= 0:
            raise ValueError("plate parameters must be positive")
        if self.theta_sh > 1:
            raise ValueError("spin Hall angle cannot exceed 1")

    @property
    def gain(self) -> float:
        """Charge-to-spin current ratio theta_SH L / t."""
        return self.theta_sh * self.length / self.thickness


def dw_plate() -> ShePlate:
    return ShePlate(0.3, 83e-8, 500e-9, 100e-9, 4e-9)


def relu_plate() -> ShePlate:
    return ShePlate(0.3, 83e-8, 69.4e-9, 14.4e-9, 4e-9)


def she_spin_current(plate: ShePlate, i_c: float) -> tuple[float, np.ndarray]:
    """Spin current and its polarization sigma = z_hat x I_c_hat (y for x flow)."""
    sigma = np.cross([0.0, 0.0, 1.0], np.asarray(plate.current_dir, dtype=float))
    return plate.gain * i_c, sigma


def plate_resistance(plate: ShePlate) -> float:
    return plate.rho * plate.length / (plate.width * plate.thickness)


def thermal_stability(p: MacrospinParams) -> float:
    if p.temperature == 0:
        return math.inf
    return p.anisotropy_energy / (2.0 * K_B * p.temperature)


def thermal_field_sigma(p: MacrospinParams, dt: float) -> float:
    """Per-component std-dev (A/m) of the thermal field held over a step dt.

    gamma is in rad/(s T), so with H in A/m the dissipation-fluctuation
    balance carries mu0 squared.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    return math.sqrt(2.0 * p.alpha * K_B * p.temperature / (GAMMA * MU_0**2 * p.ms * p.volume * dt))


def spin_current_scale(p: MacrospinParams) -> float:
    """Normalized spin current per ampere: hbar / (2 q mu0 M_s V H_k)."""
    return HBAR / (2.0 * Q_E * p.anisotropy_energy)


def normalized_spin_current(p: MacrospinParams, i_s_amps, polarization) -> np.ndarray:
    return spin_current_scale(p) * np.asarray(i_s_amps) * np.asarray(polarization, dtype=float)


def llgs_rhs(m, h, i, alpha: float):
    """dm/dtau for component arrays m, h, i (each indexable as [x, y, z]).

    Uses RHS = -m x X - alpha m x (m x X) with X = h + m x i, which expands to
    the four-term Slonczewski form with both spin-torque terms.
    """
    mx, my, mz = m
    ix, iy, iz = i
    # X = h + m x i
    xx = h[0] + (my * iz - mz * iy)
    xy = h[1] + (mz * ix - mx * iz)
    xz = h[2] + (mx * iy - my * ix)
    # c = m x X
    cx = my * xz - mz * xy
    cy = mz * xx - mx * xz
    cz = mx * xy - my * xx
    # m x c
    dx = my * cz - mz * cy
    dy = mz * cx - mx * cz
    dz = mx * cy - my * cx
    return (-cx - alpha * dx, -cy - alpha * dy, -cz - alpha * dz)


def _anisotropy(m, axis):
    ax, ay, az = axis
    proj = m[0] * ax + m[1] * ay + m[2] * az
    return (proj * ax, proj * ay, proj * az)


class LlgsEnsemble:
    """Fixed-step stochastic Heun integrator for n independent macrospins."""

    def __init__(self, p: MacrospinParams, m0, dt: float, substeps_check: bool = True):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.p = p
        self.dt = dt
        self.dtau = dt / p.time_scale
        m = np.array(m0, dtype=float)
        if m.ndim == 1:
            m = m[:, None]
        if m.shape[0] != 3:
            raise ValueError("state must have shape (3,) or (3, n)")
        self.m = m / np.sqrt(np.sum(m * m, axis=0))
        self.t = 0.0
        self.sigma_h = thermal_field_sigma(p, dt) / p.hk if p.temperature > 0 else 0.0
        self.axis = tuple(float(c) for c in p.easy_axis)
        self._check = substeps_check

    @property
    def n(self) -> int:
        return self.m.shape[1]

    def step(self, i_s, rng: np.random.Generator | None = None) -> np.ndarray:
        m = self.m
        if self.sigma_h > 0:
            if rng is None:
                raise ValueError("thermal runs need a random generator")
            th = self.sigma_h * rng.standard_normal((3, self.n))
        else:
            th = (0.0, 0.0, 0.0)
        i = np.broadcast_to(np.asarray(i_s, dtype=float).reshape(3, -1), (3, self.n))
        alpha, dtau = self.p.alpha, self.dtau

        def field_at(mv):
            a = _anisotropy(mv, self.axis)
            return (a[0] + th[0], a[1] + th[1], a[2] + th[2])

        k1 = llgs_rhs(m, field_at(m), i, alpha)
        mp = (m[0] + dtau * k1[0], m[1] + dtau * k1[1], m[2] + dtau * k1[2])
        k2 = llgs_rhs(mp, field_at(mp), i, alpha)
        out = np.empty_like(m)
        for c in range(3):
            out[c] = m[c] + 0.5 * dtau * (k1[c] + k2[c])
        norm = np.sqrt(out[0] ** 2 + out[1] ** 2 + out[2] ** 2)
        out /= norm
        if self._check and not np.all(np.isfinite(out)):
            raise IntegrationError("non-finite magnetization", m.copy())
        self.m = out
        self.t += self.dt
        return out


@dataclass
class Trajectory:
    t: np.ndarray  # (n_samples,)
    m: np.ndarray = field(repr=False)  # (n_samples, 3) or (n_samples, 3, n)

    @property
    def final(self) -> np.ndarray:
        return self.m[-1]


@dataclass(frozen=True)
class MacrospinState:
    m: tuple[float, float, float]
    time: float = 0.0

    def __post_init__(self):
        if not math.isclose(float(np.linalg.norm(self.m)), 1.0, rel_tol=1e-9):
            raise ValueError("magnetization must be a unit vector")


def llgs_integrate(
    p: MacrospinParams,
    m0,
    i_s: SpinCurrent,
    duration: float,
    dt: float = 1e-12,
    rng: np.random.Generator | None = None,
    sample_every: int = 1,
) -> Trajectory:
    """Integrate one macrospin (or an ensemble if m0 is (3, n)).

    ``i_s`` is a normalized spin-current vector or a callable of time in seconds.
    """
    if dt > 1e-12 * (1 + 1e-9):
        raise ValueError("dt must not exceed 1 ps")
    if duration < dt:
        raise ValueError("duration must be at least dt")
    if isinstance(m0, MacrospinState):
        m0 = m0.m
    ens = LlgsEnsemble(p, m0, dt)
    single = np.ndim(m0) == 1
    steps = int(round(duration / dt))
    samples_t = [0.0]
    samples_m = [ens.m.copy()]
    for k in range(1, steps + 1):
        cur = i_s(ens.t) if callable(i_s) else i_s
        ens.step(cur, rng)
        if k % sample_every == 0 or k == steps:
            samples_t.append(ens.t)
            samples_m.append(ens.m.copy())
    m = np.stack(samples_m)
    if single:
        m = m[:, :, 0]
    return Trajectory(np.asarray(samples_t), m)


def torque_residual(m, i_s, alpha: float, easy_axis=(0.0, 0.0, 1.0)) -> float:
    """Norm of dm/dtau at a noise-free state."""
    m = np.asarray(m, dtype=float).reshape(3, -1)
    i = np.broadcast_to(np.asarray(i_s, dtype=float).reshape(3, -1), m.shape)
    r = llgs_rhs(m, _anisotropy(m, easy_axis), i, alpha)
    return float(np.max(np.sqrt(r[0] ** 2 + r[1] ** 2 + r[2] ** 2)))


def static_state(
    i_s,
    alpha: float,
    m0=(0.0, 0.0, 1.0),
    easy_axis=(0.0, 0.0, 1.0),
    tol: float = 1e-10,
    dtau: float = 0.02,
    max_steps: int = 2_000_000,
) -> np.ndarray:
    """Noise-free steady magnetization reached from ``m0`` under constant ``i_s``.

    Relaxes the deterministic dynamics in reduced time until the torque falls
    below ``tol``. Vectorized: ``i_s`` may be (3, n) for n independent drives.
    """
    i = np.asarray(i_s, dtype=float).reshape(3, -1)
    m = np.broadcast_to(np.asarray(m0, dtype=float).reshape(3, -1), i.shape).copy()
    m /= np.sqrt(np.sum(m * m, axis=0))
    for _ in range(max_steps // 100):
        for _ in range(100):
            k1 = llgs_rhs(m, _anisotropy(m, easy_axis), i, alpha)
            mp = np.array([m[c] + dtau * k1[c] for c in range(3)])
            k2 = llgs_rhs(mp, _anisotropy(mp, easy_axis), i, alpha)
            m = np.array([m[c] + 0.5 * dtau * (k1[c] + k2[c]) for c in range(3)])
            m /= np.sqrt(np.sum(m * m, axis=0))
        if torque_residual(m, i, alpha, easy_axis) < tol:
            return m[:, 0] if np.ndim(i_s) == 1 else m
    raise IntegrationError("static state did not settle", m)


def magnetic_energy(p: MacrospinParams, m) -> np.ndarray:
    """-(mu0 M_s V H_k / 2) (m . n)^2 in joules, for m of shape (..., 3)."""
    proj = np.asarray(m, dtype=float) @ np.asarray(p.easy_axis, dtype=float)
    return -0.5 * p.anisotropy_energy * proj**2
