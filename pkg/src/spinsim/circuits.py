"""Behavioral ReLU and ReLU-max-pool circuits built on the SHE-MTJ cell.

Cell topology (one per activation):

* The input current I_in flows along x in the heavy-metal plate (R_in) and
  injects a y-polarized spin current into the free layer.
* The bias current I_b passes through an orthogonal injector that delivers a
  z-polarized spin current i_orth, which keeps the free layer tilt linear and
  fast, and then enters the amplifier node X as the output shift current.
* The MTJ (reference layer in-plane at ``readout_angle``) connects X to ground.
* A high-gain inverter drives V_out, with R1 fed back from V_out to X, so the
  cell is a transimpedance stage: V_out ~ V_X + R1 (G V_X - I_b).

Max-pool couples nine cells: cell i drives the gate of an n-MOSFET that
injects current from V_DD through R2 into node X of every other cell j.
The magnets are the slow dynamic states; each inverter output carries a short
first-order pole ``tau_inv`` and each inhibition gate a slower RC ``tau_gate``.
The gate lag lets every cell approach its own level before the competition
resolves, so the winner is set by the inputs rather than by early noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .magneto import (
    DELTA_VARIANTS_OE,
    LlgsEnsemble,
    MacrospinParams,
    ShePlate,
    relu_magnet,
    relu_plate,
    spin_current_scale,
    static_state,
)
from .numerics import ConvergenceError, RngStream, fixed_point
from .transport import ConductancePair

REFERENCE_HK_OE = 330.0
DEFAULT_TMR = 0.4416  # desk NEGF stack; recomputed by transport.conductance_pair


@dataclass(frozen=True)
class InverterModel:
    gain: float = 1.0e5  # 1/V, slope of the tanh argument
    v_th: float = 0.05

    def transfer(self, v_in, v_dd: float):
        return v_dd * (1.0 + np.tanh(self.gain * (self.v_th - np.asarray(v_in)))) / 2.0

    def slope(self, v_in, v_dd: float):
        th = np.tanh(self.gain * (self.v_th - np.asarray(v_in)))
        return -0.5 * v_dd * self.gain * (1.0 - th * th)

    def inverse(self, v_out, v_dd: float):
        y = np.clip(2.0 * np.asarray(v_out) / v_dd - 1.0, -1 + 1e-15, 1 - 1e-15)
        return self.v_th - np.arctanh(y) / self.gain


@dataclass(frozen=True)
class ReluCircuitParams:
    magnet: MacrospinParams
    pair: ConductancePair
    v_dd: float = 0.5
    i_b: float = 9.98e-6
    r1: float = 698.93e3
    i0: float = 14.5e-6
    plate: ShePlate = field(default_factory=relu_plate)
    inverter: InverterModel = field(default_factory=InverterModel)
    i_orth: float = 1.2  # normalized z spin current from the orthogonal injector
    readout_angle: float = math.radians(70.0)
    r_orth: float = 1000.0  # resistance of the orthogonal injection path
    tau_inv: float = 10e-12

    def __post_init__(self):
        for name in ("v_dd", "i_b", "r1", "i0", "r_orth", "tau_inv"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def r_in(self) -> float:
        return self.plate.rho * self.plate.length / (self.plate.width * self.plate.thickness)

    @property
    def drive_per_amp(self) -> float:
        """Normalized y spin current per ampere of plate charge current."""
        return self.plate.gain * spin_current_scale(self.magnet)

    @property
    def readout_axis(self) -> np.ndarray:
        b = self.readout_angle
        return np.array([-math.cos(b), math.sin(b), 0.0])

    @property
    def tmr_factor(self) -> float:
        return self.pair.tmr / (2.0 + self.pair.tmr)

    def conductance(self, m) -> np.ndarray:
        """MTJ conductance for magnetization components m (3, ...)."""
        p = self.readout_axis
        proj = p[0] * m[0] + p[1] * m[1] + p[2] * m[2]
        return self.pair.g_parallel * (1.0 + self.tmr_factor * proj)

    def spin_current(self, i_plate):
        i_plate = np.asarray(i_plate, dtype=float)
        iy = self.drive_per_amp * i_plate
        return np.stack([np.zeros_like(iy), iy, np.full_like(iy, self.i_orth)])


@dataclass(frozen=True)
class NmosModel:
    k: float = 5.0e-5  # A/V^2
    v_t: float = 0.0  # low-threshold device; node X already sits near 50 mV

    def __post_init__(self):
        if self.k <= 0 or self.v_t < 0:
            raise ValueError("need k > 0 and v_t >= 0")

    def current(self, v_gs, v_ds):
        v_ov = np.maximum(np.asarray(v_gs) - self.v_t, 0.0)
        v_ds = np.maximum(np.asarray(v_ds), 0.0)
        sat = 0.5 * self.k * v_ov**2
        tri = self.k * (v_ov * v_ds - 0.5 * v_ds**2)
        return np.where(v_ds >= v_ov, sat, tri)


@dataclass(frozen=True)
class MaxPoolParams:
    cell: ReluCircuitParams
    r2: float = 16e3
    nmos: NmosModel = field(default_factory=NmosModel)
    fan_in: int = 9
    tau_gate: float = 1e-9  # gate RC of the inhibition transistors

    def __post_init__(self):
        if self.fan_in != 9:
            raise ValueError("the max-pool window is fixed at 3x3")
        if self.r2 <= 0 or self.tau_gate <= 0:
            raise ValueError("r2 and tau_gate must be positive")


def maxpool_params(cell: ReluCircuitParams, r2: float = 16e3, nmos: NmosModel | None = None, tau_gate: float = 1e-9) -> MaxPoolParams:
    """Max-pool around ``cell`` with inhibition scaled like the cell currents.

    ``r2`` and ``nmos`` are the 330 Oe reference values; k and 1/R2 follow
    H_k so the inhibition stays proportional to the output-shift current.
    """
    s = cell.magnet.hk / relu_magnet(REFERENCE_HK_OE).hk
    nmos = nmos or NmosModel()
    return MaxPoolParams(cell, r2=r2 / s, nmos=replace(nmos, k=nmos.k * s), tau_gate=tau_gate)


@dataclass
class CircuitTrace:
    t: np.ndarray
    v_out: np.ndarray  # (n_t, n_cells) or (n_t, n_trials, n_cells)
    power: np.ndarray  # instantaneous total power, same leading shape as t
    settle_time: float | np.ndarray
    winner: int | np.ndarray | None = None
    window_mean: np.ndarray | None = None

    @property
    def average_power(self) -> float | np.ndarray:
        return average_power(self)


# --------------------------------------------------------------------------- #
# device design and calibration


def scaled_params(hk_oe: float, pair: ConductancePair | None = None, temperature: float = 300.0, **overrides) -> ReluCircuitParams:
    """Cell for a magnet with anisotropy ``hk_oe``.

    Currents, conductances and 1/R1 scale with H_k relative to the 330 Oe
    reference so the normalized spin currents and the output swing are
    preserved across magnet variants.
    """
    s = hk_oe / REFERENCE_HK_OE
    pair = pair or ConductancePair(1.0 + DEFAULT_TMR, 1.0)
    base = ReluCircuitParams(magnet=relu_magnet(hk_oe, temperature), pair=pair)
    return replace(base, i_b=base.i_b * s, r1=base.r1 / s, i0=base.i0 * s, **overrides)


def variant_params(delta: float, pair: ConductancePair | None = None, temperature: float = 300.0, **kw) -> ReluCircuitParams:
    try:
        hk = DELTA_VARIANTS_OE[delta]
    except KeyError:
        raise ValueError(f"unknown thermal-stability variant {delta}; choose from {sorted(DELTA_VARIANTS_OE)}") from None
    return calibrate_relu(scaled_params(hk, pair, temperature, **kw))


def _steady_m(p: ReluCircuitParams, u) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return static_state(p.spin_current(u * p.i0), p.magnet.alpha, dtau=0.05)


def _dc_vout_from_g(p: ReluCircuitParams, g, i_extra=0.0):
    """Exact node solution V_out(G) of the single-cell amplifier loop.

    KCL at X: I_b + I_extra + (V_out - V_X)/R1 - G V_X = 0 with the inverter
    imposing V_X = inverse(V_out). The residual is monotone in V_out, so a
    vectorized bisection brackets the root before a fixed-point polish.
    """
    g = np.asarray(g, dtype=float)
    i_in = p.i_b + np.asarray(i_extra, dtype=float)
    inv = p.inverter

    def resid(v):
        x = inv.inverse(v, p.v_dd)
        return i_in + (v - x) / p.r1 - g * x

    lo = np.full(np.broadcast(g, i_in).shape, 0.0)
    hi = np.full(lo.shape, p.v_dd)
    for _ in range(70):
        mid = 0.5 * (lo + hi)
        r = resid(mid)
        # resid increases with v, root where resid = 0
        lo = np.where(r < 0, mid, lo)
        hi = np.where(r >= 0, mid, hi)
    return 0.5 * (lo + hi)


def _calibrate_pair(p: ReluCircuitParams, v_zero: float) -> ConductancePair:
    """Mid-point conductance placing V_out(u = 0) at ``v_zero``."""
    inv = p.inverter
    x0 = inv.inverse(v_zero, p.v_dd)
    m0 = _steady_m(p, 0.0)
    proj0 = float(p.readout_axis @ m0[:, 0])
    g0 = (p.i_b + (v_zero - x0) / p.r1) / x0
    g_mid = g0 / (1.0 + p.tmr_factor * proj0)
    return p.pair.scaled(g_mid)


def calibrate_relu(p: ReluCircuitParams, v_zero: float = 4e-3, full_scale: float = 0.995) -> ReluCircuitParams:
    """Fit the MTJ scale and orthogonal injection so the DC curve spans [0, V_DD].

    The MTJ scale sets V_out(0) = v_zero; the orthogonal spin current sets the
    tilt swing so that V_out(I_0) = full_scale * V_DD. Cached on the inputs.
    """
    return _calibrate_cached(p, v_zero, full_scale)


@lru_cache(maxsize=64)
def _calibrate_cached(p: ReluCircuitParams, v_zero: float, full_scale: float) -> ReluCircuitParams:
    target = full_scale * p.v_dd

    def vout_full(i_orth):
        q = replace(p, i_orth=i_orth)
        q = replace(q, pair=_calibrate_pair(q, v_zero))
        g1 = q.conductance(_steady_m(q, 1.0))
        return q, float(_dc_vout_from_g(q, g1)[0])

    # more orthogonal current means less tilt and a smaller swing
    lo, hi = 0.3, 4.0
    q_lo, v_lo = vout_full(lo)
    q_hi, v_hi = vout_full(hi)
    if not (v_hi < target < v_lo):
        raise ConvergenceError("full-scale calibration not bracketed", abs(v_lo - target), np.array([lo, hi]))
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        q_mid, v_mid = vout_full(mid)
        if v_mid > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-7:
            break
    return vout_full(0.5 * (lo + hi))[0]


# --------------------------------------------------------------------------- #
# DC operation


def inverter_transfer(v_in, p: ReluCircuitParams):
    return p.inverter.transfer(v_in, p.v_dd)


def relu_dc_transfer(p: ReluCircuitParams, i_in, tol: float = 1e-6):
    """Noise-free DC output voltage for input current(s) ``i_in``.

    Static LLGS balance gives the tilted magnetization and MTJ conductance;
    the amplifier node is solved by bracketing and then polished with a
    damped fixed-point iteration to ``tol`` volts.
    """
    i_in = np.asarray(i_in, dtype=float)
    if np.any(np.abs(i_in) > 2 * p.i0 * (1 + 1e-12)):
        raise ValueError("|I_in| must not exceed 2 I_0")
    u = np.atleast_1d(i_in) / p.i0
    g = p.conductance(_steady_m(p, u))
    v = _dc_vout_from_g(p, g)
    inv = p.inverter

    def node_map(vo):
        # one Newton update of the monotone KCL residual, used as the fixed-point map
        x = inv.inverse(vo, p.v_dd)
        dx = -1.0 / np.maximum(np.abs(inv.slope(x, p.v_dd)), 1e-300)
        r = p.i_b + (vo - x) / p.r1 - g * x
        dr = 1.0 / p.r1 + dx * (-1.0 / p.r1 - g)
        return np.clip(vo - r / dr, 1e-12 * p.v_dd, p.v_dd * (1 - 1e-12))

    v = fixed_point(node_map, v, damping=1.0, tol=tol, max_iter=200)
    v = np.asarray(v)
    return float(v[0]) if np.ndim(i_in) == 0 else v.reshape(np.shape(i_in))


def ideal_relu(u, v_dd: float = 0.5):
    return v_dd * np.clip(u, 0.0, None)


# --------------------------------------------------------------------------- #
# transient co-integration


def _inhibition_table(mp: MaxPoolParams, n: int = 2001):
    """Injected inhibition current h(V_gate), tabulated."""
    cell = mp.cell
    vg = np.linspace(0.0, cell.v_dd, n)
    vx = cell.inverter.v_th
    # solve I = nmos(V_g - V_x, V_DD - V_x - I R2) by bisection on I
    lo = np.zeros(n)
    hi = np.full(n, (cell.v_dd - vx) / mp.r2)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        f = mp.nmos.current(vg - vx, cell.v_dd - vx - mid * mp.r2) - mid
        lo = np.where(f > 0, mid, lo)
        hi = np.where(f <= 0, mid, hi)
    return vg, 0.5 * (lo + hi)


def _node_voltage(cell: ReluCircuitParams, v, g, i_inh):
    return (cell.i_b + i_inh + v / cell.r1) / (g + 1.0 / cell.r1)


def _cell_power(cell: ReluCircuitParams, v, vx, i_in):
    i_r1 = (v - vx) / cell.r1
    return (
        i_in**2 * cell.r_in
        + cell.i_b**2 * cell.r_orth
        + cell.i_b * vx
        + cell.v_dd * np.maximum(i_r1, 0.0)
    )


def _simulate(
    cell: ReluCircuitParams,
    i_in: np.ndarray,
    duration: float,
    temperature: float,
    seed_stream: RngStream | None,
    dt: float,
    maxpool: MaxPoolParams | None,
    window: float,
    record_every: int,
):
    """Batched transient: i_in has shape (n_trials, n_cells)."""
    n_trials, n_cells = i_in.shape
    magnet = replace(cell.magnet, temperature=temperature)
    m0 = np.zeros((3, n_trials * n_cells))
    m0[2] = 1.0
    ens = LlgsEnsemble(magnet, m0, dt)
    rng = seed_stream.generator() if (temperature > 0 and seed_stream is not None) else None
    if temperature > 0 and rng is None:
        raise ValueError("thermal transients need an RngStream")
    drive = cell.spin_current(i_in.reshape(-1))
    inv = cell.inverter
    rho = dt / cell.tau_inv

    # start from the zero-input operating point
    g = cell.conductance(ens.m).reshape(n_trials, n_cells)
    v = np.asarray(_dc_vout_from_g(cell, g))
    if maxpool is not None:
        vg_tab, h_tab = _inhibition_table(maxpool)
        v_gate = v.copy()
        lam = -math.expm1(-dt / maxpool.tau_gate)

    steps = int(round(duration / dt))
    n_win = max(1, int(round(window / dt)))
    rec_t, rec_v, rec_p = [], [], []
    acc = np.zeros_like(v)
    for k in range(1, steps + 1):
        ens.step(drive, rng)
        g = cell.conductance(ens.m).reshape(n_trials, n_cells)
        e = 1.0 / (g + 1.0 / cell.r1)
        if maxpool is not None:
            h = np.interp(v_gate, vg_tab, h_tab)
            i_inh = h.sum(axis=1, keepdims=True) - h
        else:
            i_inh = 0.0
        vx = _node_voltage(cell, v, g, i_inh)
        f = inv.transfer(vx, cell.v_dd)
        s = inv.slope(vx, cell.v_dd)
        # linearly implicit Euler on tau dV/dt = F(V) - V (V enters F through R1)
        dv = rho * (f - v) / (1.0 + rho - rho * s * e / cell.r1)
        v = np.clip(v + dv, 0.0, cell.v_dd)
        pw = _cell_power(cell, v, vx, i_in).sum(axis=1)
        if maxpool is not None:
            pw = pw + cell.v_dd * (h.sum(axis=1) * (n_cells - 1))
            v_gate += lam * (v - v_gate)
        if k > steps - n_win:
            acc += v
        if k % record_every == 0 or k == steps:
            rec_t.append(k * dt)
            rec_v.append(v.copy())
            rec_p.append(pw)
    t = np.asarray(rec_t)
    vs = np.stack(rec_v)
    return t, vs, np.stack(rec_p), acc / n_win


def settle_time(t: np.ndarray, v: np.ndarray, v_dd: float, band: float = 0.01) -> np.ndarray:
    """First time after which |v - v_final| < band * V_DD holds to the end.

    ``v`` has time on axis 0; the result has the remaining shape.
    """
    dev = np.abs(v - v[-1]) >= band * v_dd
    outside = np.where(dev.any(axis=0), dev.shape[0] - 1 - np.argmax(dev[::-1], axis=0), -1)
    idx = np.minimum(outside + 1, len(t) - 1)
    return np.where(outside < 0, t[0] * 0.0, t[idx])


def relu_transient(
    p: ReluCircuitParams,
    i_in,
    duration: float = 20e-9,
    temperature: float = 0.0,
    rng: RngStream | None = None,
    dt: float = 0.5e-12,
    window: float = 4e-9,
    record_every: int = 20,
) -> CircuitTrace:
    """Step response of one or many independent cells (``i_in`` scalar or 1-D)."""
    if duration < 20e-9 * (1 - 1e-9):
        raise ValueError("duration must be at least 20 ns")
    arr = np.atleast_1d(np.asarray(i_in, dtype=float))[:, None]
    t, v, pw, mean = _simulate(p, arr, duration, temperature, rng, dt, None, window, record_every)
    v = v[:, :, 0]
    st = settle_time(t, v, p.v_dd)
    out = CircuitTrace(t, v, pw, st, None, mean[:, 0])
    if np.ndim(i_in) == 0:
        out = CircuitTrace(t, v[:, 0], pw[:, 0], float(st[0]), None, mean[:, 0])
    return out


def maxpool_winner(v_final: np.ndarray, v_dd: float) -> np.ndarray:
    """Winner index per trial, or -1 when no output exceeds V_DD/4."""
    v_final = np.atleast_2d(v_final)
    idx = np.argmax(v_final, axis=1)
    top = v_final[np.arange(v_final.shape[0]), idx]
    return np.where(top > v_dd / 4.0, idx, -1)


def maxpool_transient(
    mp: MaxPoolParams,
    i_in,
    duration: float = 40e-9,
    temperature: float = 0.0,
    rng: RngStream | None = None,
    dt: float = 0.5e-12,
    window: float = 4e-9,
    record_every: int = 40,
) -> CircuitTrace:
    """Nine coupled cells; ``i_in`` is (9,) or (n_trials, 9)."""
    if duration < 40e-9 * (1 - 1e-9):
        raise ValueError("duration must be at least 40 ns")
    arr = np.asarray(i_in, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != mp.fan_in:
        raise ValueError("max-pool expects nine inputs per trial")
    t, v, pw, mean = _simulate(mp.cell, arr, duration, temperature, rng, dt, mp, window, record_every)
    st = settle_time(t, v, mp.cell.v_dd).max(axis=-1)
    win = maxpool_winner(mean, mp.cell.v_dd)
    if single:
        return CircuitTrace(t, v[:, 0], pw[:, 0], float(st[0]), int(win[0]), mean[0])
    return CircuitTrace(t, v, pw, st, win, mean)


def average_power(trace: CircuitTrace):
    """Time average of the recorded instantaneous power."""
    if trace.power.size == 0:
        raise ValueError("empty trace")
    return trace.power.mean(axis=0) if trace.power.ndim > 1 else float(trace.power.mean())


def _with_temperature(p, temperature: float):
    if isinstance(p, MaxPoolParams):
        return replace(p, cell=_with_temperature(p.cell, temperature))
    return replace(p, magnet=replace(p.magnet, temperature=temperature))


def _with_variant(p, delta: float):
    if isinstance(p, MaxPoolParams):
        s_old = p.cell.magnet.hk / relu_magnet(REFERENCE_HK_OE).hk
        nmos = replace(p.nmos, k=p.nmos.k / s_old)
        return maxpool_params(_with_variant(p.cell, delta), p.r2 * s_old, nmos, p.tau_gate)
    return variant_params(delta, p.pair, p.magnet.temperature)


def circuit_error(
    p: ReluCircuitParams | MaxPoolParams,
    which: str = "relu",
    delta: float | None = None,
    n_mc: int = 500,
    rng: RngStream | None = None,
    temperature: float = 300.0,
    dt: float = 0.5e-12,
) -> float:
    """RMS deviation from the ideal response, in percent of V_DD.

    Inputs are uniform in [-1, 1] I_0 (nine per trial for max-pool, compared
    against V_DD relu(max u)); the circuit output is the read-window mean.
    ``delta`` swaps in one of the tabulated magnet variants.
    """
    if n_mc < 500:
        raise ValueError("n_mc must be at least 500")
    if which not in ("relu", "maxpool"):
        raise ValueError("which must be 'relu' or 'maxpool'")
    if which == "maxpool" and not isinstance(p, MaxPoolParams):
        p = maxpool_params(p)
    if which == "relu" and isinstance(p, MaxPoolParams):
        p = p.cell
    if delta is not None:
        p = _with_variant(p, delta)
    rng = rng or RngStream(0)
    draw, noise = rng.child(0), rng.child(1)
    cell = p.cell if isinstance(p, MaxPoolParams) else p
    gen = draw.generator()
    if which == "relu":
        u = gen.uniform(-1.0, 1.0, n_mc)
        tr = relu_transient(cell, u * cell.i0, temperature=temperature, rng=noise, dt=dt)
        out, ideal = tr.window_mean, ideal_relu(u, cell.v_dd)
    else:
        u = gen.uniform(-1.0, 1.0, (n_mc, p.fan_in))
        tr = maxpool_transient(p, u * cell.i0, temperature=temperature, rng=noise, dt=dt)
        out, ideal = tr.window_mean.max(axis=1), ideal_relu(u.max(axis=1), cell.v_dd)
    return float(100.0 * np.sqrt(np.mean((out - ideal) ** 2)) / cell.v_dd)


def maxpool_inputs(gen: np.random.Generator, n: int, min_top: float = 0.3, min_gap: float = 0.0) -> np.ndarray:
    """Normalized 3x3 windows, uniform in [-1, 1], with a clear positive maximum.

    Rejection keeps draws whose largest entry is at least ``min_top`` (so the
    winner clears V_DD/4) and whose top-two gap is at least ``min_gap``.
    """
    out = []
    while sum(len(o) for o in out) < n:
        u = gen.uniform(-1.0, 1.0, (2 * n + 16, 9))
        s = np.sort(u, axis=1)
        keep = (s[:, -1] >= min_top) & (s[:, -1] - s[:, -2] >= min_gap)
        out.append(u[keep])
    return np.concatenate(out)[:n]


def maxpool_accuracy(
    mp: MaxPoolParams,
    n_trials: int,
    rng: RngStream,
    temperature: float = 0.0,
    min_gap: float = 0.0,
    dt: float = 0.5e-12,
) -> float:
    """Fraction of trials whose winner index equals argmax of the inputs."""
    streams = (rng.child(0), rng.child(1))
    u = maxpool_inputs(streams[0].generator(), n_trials, min_gap=min_gap)
    tr = maxpool_transient(mp, u * mp.cell.i0, temperature=temperature, rng=streams[1], dt=dt)
    return float(np.mean(tr.winner == np.argmax(u, axis=1)))
