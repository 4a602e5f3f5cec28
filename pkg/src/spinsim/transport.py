"""Spin-resolved 1-D NEGF transport through an FM/barrier/FM tunnel junction.

The device is an effective-mass tight-binding chain with a 2x2 spin block on
every site. The fixed (top) lead is magnetized along z, the free (bottom) lead
is rotated by ``theta`` about y. Both leads are semi-infinite and enter through
analytic surface self-energies. Energies are in eV, bias in volts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import G_QUANTUM, H_EV, HBAR, HBAR_EV, K_B_EV, M_E, Q_E
from .numerics import NumericalError, solve_linear

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
EYE2 = np.eye(2, dtype=complex)

# hbar^2 / (2 m_e) in eV m^2
_HBAR2_2M = HBAR**2 / (2.0 * M_E) / Q_E


class TransportConsistencyError(NumericalError):
    """Current-operator and Landauer currents disagree."""


@dataclass(frozen=True)
class MtjTransportParams:
    lattice_spacing: float = 0.25e-9
    barrier_sites: int = 8
    m_fm: float = 0.73  # multiples of m_e
    m_barrier: float = 0.18
    fermi_energy: float = 2.25
    exchange_splitting: float = 2.15
    barrier_height: float = 0.76
    area: float = 14.4e-9 * 69.4e-9
    temperature: float = 300.0
    lead_pad_sites: int = 2

    def __post_init__(self):
        if self.lattice_spacing <= 0:
            raise ValueError("lattice spacing must be positive")
        if self.barrier_sites < 1:
            raise ValueError("need at least one barrier site")
        if self.exchange_splitting < 0:
            raise ValueError("exchange splitting must be non-negative")
        if self.barrier_height < -self.fermi_energy:
            raise ValueError("barrier band bottom may not sit below the lead band bottom")
        if self.area <= 0 or self.m_fm <= 0 or self.m_barrier <= 0:
            raise ValueError("area and effective masses must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")

    def hopping(self, mass: float) -> float:
        return _HBAR2_2M / (mass * self.lattice_spacing**2)

    @property
    def transverse_modes(self) -> int:
        return max(1, round(self.area / self.lattice_spacing**2))


@dataclass(frozen=True)
class ConductancePair:
    g_p: float
    g_ap: float

    def __post_init__(self):
        if not (self.g_p >= self.g_ap > 0):
            raise ValueError(f"expected G_P >= G_AP > 0, got {self.g_p}, {self.g_ap}")

    @property
    def tmr(self) -> float:
        return (self.g_p - self.g_ap) / self.g_ap

    @property
    def g_parallel(self) -> float:
        """Mid-point conductance (G_P + G_AP)/2 used as the weight reference."""
        return 0.5 * (self.g_p + self.g_ap)

    def scaled(self, g_mid: float) -> "ConductancePair":
        """Same TMR with the mid-point conductance moved to ``g_mid``."""
        k = g_mid / self.g_parallel
        return ConductancePair(self.g_p * k, self.g_ap * k)


def spin_rotation(theta: float) -> np.ndarray:
    """Spin-1/2 rotation by ``theta`` about y: R sz R^dag = cos(t) sz + sin(t) sx."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _surface_phase(x):
    """e^{ika} for a 1-D chain with cos(ka) = x, retarded branch (|e^{ika}| <= 1)."""
    x = np.asarray(x, dtype=float)
    inband = np.abs(x) <= 1.0
    root = np.sqrt(np.abs(1.0 - x**2))
    out = np.where(inband, x + 1j * root, x - np.sign(x) * root)
    return out.astype(complex)


@dataclass(frozen=True)
class Lead:
    hopping: float
    band_bottom: tuple[float, float]  # majority, minority (includes bias shift)
    rotation: np.ndarray = field(repr=False)

    def self_energy(self, energies: np.ndarray) -> np.ndarray:
        """(nE, 2, 2) surface self-energy -t e^{ika} per spin band."""
        t = self.hopping
        e = np.atleast_1d(energies)[:, None]
        x = 1.0 - (e - np.asarray(self.band_bottom)[None, :]) / (2.0 * t)
        diag = -t * _surface_phase(x)
        r = self.rotation
        return np.einsum("ij,ej,kj->eik", r, diag, r.conj())

    def in_band(self, energies: np.ndarray) -> np.ndarray:
        e = np.atleast_1d(energies)[:, None]
        lo = np.asarray(self.band_bottom)[None, :]
        return np.any((e >= lo) & (e <= lo + 4 * self.hopping), axis=1)


@dataclass(frozen=True)
class Device:
    """Hamiltonian of the device region plus its two leads at a fixed bias."""

    hamiltonian: np.ndarray = field(repr=False)
    top: Lead
    bottom: Lead
    bias: float
    mu_top: float
    mu_bottom: float
    temperature: float
    n_sites: int
    bond: int  # bond (bond, bond+1) used by the current operator

    @property
    def size(self) -> int:
        return self.hamiltonian.shape[0]

    def block(self, i: int, j: int) -> np.ndarray:
        return self.hamiltonian[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]


def build_device(params: MtjTransportParams, theta: float = 0.0, bias: float = 0.0) -> Device:
    """Tight-binding chain: pad FM sites | barrier | pad FM sites.

    Bias drops linearly across the barrier; the top lead sits at +bias/2 and
    the bottom lead at -bias/2 (electron potential energy, eV per volt).
    """
    if not 0.0 <= theta <= math.pi + 1e-12:
        raise ValueError("theta must lie in [0, pi]")
    if abs(bias) > 1.0:
        raise ValueError("|bias| must not exceed 1 V")
    npad, nb = params.lead_pad_sites, params.barrier_sites
    n = 2 * npad + nb
    t_fm = params.hopping(params.m_fm)
    masses = [params.m_fm] * npad + [params.m_barrier] * nb + [params.m_fm] * npad
    # bond hopping from the mean mass of the two sites
    t_bond = [_HBAR2_2M / (0.5 * (masses[j] + masses[j + 1]) * params.lattice_spacing**2) for j in range(n - 1)]

    delta = params.exchange_splitting
    r_top, r_bot = spin_rotation(0.0), spin_rotation(theta)
    n_top = r_top @ SIGMA_Z @ r_top.conj().T
    n_bot = r_bot @ SIGMA_Z @ r_bot.conj().T
    exch_top = 0.5 * delta * (EYE2 - n_top)
    exch_bot = 0.5 * delta * (EYE2 - n_bot)

    u_top, u_bot = 0.5 * bias, -0.5 * bias
    h = np.zeros((2 * n, 2 * n), dtype=complex)
    for j in range(n):
        left = t_bond[j - 1] if j > 0 else t_fm
        right = t_bond[j] if j < n - 1 else t_fm
        if j < npad:
            onsite = (left + right + u_top) * EYE2 + exch_top
        elif j >= npad + nb:
            onsite = (left + right + u_bot) * EYE2 + exch_bot
        else:
            k = j - npad + 1
            ramp = u_top - bias * k / (nb + 1)
            onsite = (left + right + params.fermi_energy + params.barrier_height + ramp) * EYE2
        h[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = onsite
        if j < n - 1:
            h[2 * j : 2 * j + 2, 2 * j + 2 : 2 * j + 4] = -t_bond[j] * EYE2
            h[2 * j + 2 : 2 * j + 4, 2 * j : 2 * j + 2] = -t_bond[j] * EYE2

    top = Lead(t_fm, (u_top, u_top + delta), r_top)
    bottom = Lead(t_fm, (u_bot, u_bot + delta), r_bot)
    return Device(
        hamiltonian=h,
        top=top,
        bottom=bottom,
        bias=bias,
        mu_top=params.fermi_energy + 0.5 * bias,
        mu_bottom=params.fermi_energy - 0.5 * bias,
        temperature=params.temperature,
        n_sites=n,
        bond=npad + nb // 2,
    )


def fermi(e, mu: float, temperature: float):
    e = np.asarray(e, dtype=float)
    if temperature <= 0:
        return np.where(e < mu, 1.0, np.where(e > mu, 0.0, 0.5))
    x = (e - mu) / (K_B_EV * temperature)
    return 0.5 * (1.0 - np.tanh(0.5 * x))


def _green_columns(device: Device, energies: np.ndarray):
    """Contact columns of G(E) plus the lead broadenings, batched over E."""
    ne = energies.size
    size = device.size
    sig_t = device.top.self_energy(energies)
    sig_b = device.bottom.self_energy(energies)
    a = np.broadcast_to(np.eye(size, dtype=complex), (ne, size, size)) * energies[:, None, None]
    a = a - device.hamiltonian[None]
    a[:, :2, :2] -= sig_t
    a[:, -2:, -2:] -= sig_b
    rhs = np.zeros((size, 4), dtype=complex)
    rhs[:2, :2] = EYE2
    rhs[-2:, 2:] = EYE2
    cols = solve_linear(a, np.broadcast_to(rhs, (ne, size, 4)))
    gam_t = 1j * (sig_t - np.conj(np.swapaxes(sig_t, 1, 2)))
    gam_b = 1j * (sig_b - np.conj(np.swapaxes(sig_b, 1, 2)))
    return cols[:, :, :2], cols[:, :, 2:], gam_t, gam_b


def _conducting(device: Device, energies: np.ndarray) -> np.ndarray:
    return device.top.in_band(energies) & device.bottom.in_band(energies)


def transmission(device: Device, energies) -> np.ndarray:
    """Spin-summed coherent transmission Tr[G_T G Gamma_B G^dag] (0 <= T <= 2)."""
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    out = np.zeros(energies.size)
    mask = _conducting(device, energies)
    if np.any(mask):
        g_t, g_b, gam_t, gam_b = _green_columns(device, energies[mask])
        # G_{B,T} block: rows of the last site, columns of the top contact
        g_bt = g_t[:, -2:, :]
        val = np.einsum("eij,ejk,ekl,eli->e", gam_b, g_bt, gam_t, _dag(g_bt))
        out[mask] = np.clip(val.real, 0.0, 2.0)
    return out


def _spectral(device: Device, energies: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bond current density and Landauer integrand on one shared solve.

    Both are returned in units of 1/(eV s) so that q * integral dE gives amps.
    """
    j_op = np.zeros(energies.size)
    j_ld = np.zeros(energies.size)
    mask = _conducting(device, energies)
    if not np.any(mask):
        return j_op, j_ld
    e = energies[mask]
    g_t, g_b, gam_t, gam_b = _green_columns(device, e)
    f_t = fermi(e, device.mu_top, device.temperature)
    f_b = fermi(e, device.mu_bottom, device.temperature)
    i = device.bond
    rows = slice(2 * i, 2 * i + 4)
    # G^n restricted to the two bond sites: G Sigma_in G^dag / (2 pi)
    ct, cb = g_t[:, rows, :], g_b[:, rows, :]
    gn = (
        ct @ (gam_t * f_t[:, None, None]) @ _dag(ct) + cb @ (gam_b * f_b[:, None, None]) @ _dag(cb)
    ) / (2 * np.pi)
    h_fwd = device.block(i, i + 1)
    h_bwd = device.block(i + 1, i)
    op = (1j / HBAR_EV) * (h_fwd[None] @ gn[:, 2:, :2] - h_bwd[None] @ gn[:, :2, 2:])
    # electrons flowing top -> bottom carry positive terminal current
    j_op[mask] = np.trace(op, axis1=1, axis2=2).real
    g_bt = g_t[:, -2:, :]
    t = np.einsum("eij,ejk,ekl,eli->e", gam_b, g_bt, gam_t, _dag(g_bt)).real
    j_ld[mask] = np.clip(t, 0.0, 2.0) * (f_t - f_b) / H_EV
    return j_op, j_ld


def _dag(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(x, -1, -2))


@dataclass
class CurrentResult:
    current_op: float
    landauer: float
    n_points: int
    rel_change: float = 0.0  # last grid-doubling change of the integral

    @property
    def current(self) -> float:
        return self.current_op

    @property
    def relative_gap(self) -> float:
        scale = max(abs(self.current_op), abs(self.landauer))
        return 0.0 if scale == 0 else abs(self.current_op - self.landauer) / scale


def energy_window(params: MtjTransportParams, bias: float) -> tuple[float, float]:
    kt = K_B_EV * max(params.temperature, 1.0)
    half = 10 * kt + 0.5 * abs(bias)
    return params.fermi_energy - half, params.fermi_energy + half


def terminal_current(
    device: Device,
    window: tuple[float, float],
    rtol: float = 1e-8,
    start_points: int = 129,
    max_points: int = 2**16 + 1,
) -> CurrentResult:
    """Terminal current (A, per transverse channel) by two routes.

    Route (i) integrates the bond current operator over energy, route (ii) the
    Landauer formula. Both share an adaptive trapezoid grid that doubles until
    the current-operator integral changes by less than ``rtol``.
    """
    if device.bias == 0.0:
        return CurrentResult(0.0, 0.0, 0)
    lo, hi = window
    # lead band edges become grid nodes so the sqrt onset is not straddled
    edges = [x for lead in (device.top, device.bottom) for x in lead.band_bottom if lo < x < hi]
    e = np.unique(np.concatenate([np.linspace(lo, hi, start_points), edges]))
    j_op, j_ld = _spectral(device, e)
    prev = np.trapezoid(j_op, e)
    change = np.inf
    while e.size < max_points:
        e_mid = 0.5 * (e[:-1] + e[1:])
        jm_op, jm_ld = _spectral(device, e_mid)
        e = _interleave(e, e_mid)
        j_op = _interleave(j_op, jm_op)
        j_ld = _interleave(j_ld, jm_ld)
        cur = np.trapezoid(j_op, e)
        change = abs(cur - prev) / max(abs(cur), 1e-300)
        prev = cur
        if change <= rtol:
            break
    result = CurrentResult(Q_E * np.trapezoid(j_op, e), Q_E * np.trapezoid(j_ld, e), e.size, float(change))
    if result.relative_gap > 1e-4:
        raise TransportConsistencyError(
            f"bond-current and Landauer routes disagree: {result.current_op:.6e} vs {result.landauer:.6e} A"
        )
    return result


def _interleave(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty(a.size + b.size)
    out[0::2] = a
    out[1::2] = b
    return out


def current_at(params: MtjTransportParams, theta: float, bias: float, **kwargs) -> CurrentResult:
    dev = build_device(params, theta, bias)
    return terminal_current(dev, energy_window(params, bias), **kwargs)


def channel_conductance(params: MtjTransportParams, theta: float, dv: float = 1e-3) -> float:
    """Linear-response conductance of one 1-D channel by a +/- dv secant."""
    i_plus = current_at(params, theta, dv).current
    i_minus = current_at(params, theta, -dv).current
    return (i_plus - i_minus) / (2 * dv)


def conductance_pair(params: MtjTransportParams) -> ConductancePair:
    """Device G_P (theta = 0) and G_AP (theta = pi), area-scaled."""
    modes = params.transverse_modes
    g_p = channel_conductance(params, 0.0) * modes
    if params.exchange_splitting == 0:
        g_ap = g_p
    else:
        g_ap = channel_conductance(params, math.pi) * modes
    return ConductancePair(g_p, g_ap)


def mtj_conductance(pair: ConductancePair, theta) -> np.ndarray | float:
    """G(theta) = G_P cos^2(theta/2) + G_AP sin^2(theta/2)."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta > math.pi + 1e-12):
        raise ValueError("theta must lie in [0, pi]")
    # half-angle identities keep the weights exactly 1/0, 1/2, 0/1 at 0, pi/2, pi
    c = 0.5 * (1.0 + np.cos(theta))
    g = pair.g_p * c + pair.g_ap * (1.0 - c)
    return float(g) if g.ndim == 0 else g


def transmission_spectrum(params: MtjTransportParams, energies) -> tuple[np.ndarray, np.ndarray]:
    """Zero-bias T_P(E), T_AP(E) on the given energy grid."""
    t_p = transmission(build_device(params, 0.0, 0.0), energies)
    t_ap = transmission(build_device(params, math.pi, 0.0), energies)
    return t_p, t_ap


def clean_wire(params: MtjTransportParams | None = None) -> MtjTransportParams:
    """Uniform, unpolarized chain (no barrier, equal masses) for limit checks."""
    params = params or MtjTransportParams()
    return replace(params, exchange_splitting=0.0, barrier_height=-params.fermi_energy, m_barrier=params.m_fm)


__all__ = [
    "ConductancePair",
    "CurrentResult",
    "Device",
    "MtjTransportParams",
    "TransportConsistencyError",
    "build_device",
    "channel_conductance",
    "clean_wire",
    "conductance_pair",
    "current_at",
    "energy_window",
    "fermi",
    "mtj_conductance",
    "spin_rotation",
    "terminal_current",
    "transmission",
    "transmission_spectrum",
    "G_QUANTUM",
]
