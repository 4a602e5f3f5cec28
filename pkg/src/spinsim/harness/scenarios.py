"""Named, self-checking scenarios; each reproduces one operation's worked examples.

A scenario returns rows of (check, expected, got, passed) and is written to
``scenario_<name>.csv``; the run seed drives every random draw.
"""

from __future__ import annotations

import json
import math
import tempfile
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image

from .. import circuits, crossbar, hwnn, magneto, numerics, synapse, transport
from ..constants import G_QUANTUM
from ..numerics import RngStream
from .config import RunConfig
from .data import generate_shapes, load_camvid_layout

Row = dict


def _row(check: str, expected, got, passed: bool) -> Row:
    return {"check": check, "expected": expected, "got": got, "passed": bool(passed)}


def _close(check: str, expected: float, got: float, rtol: float = 0.0, atol: float = 0.0) -> Row:
    return _row(check, float(expected), float(got), abs(got - expected) <= atol + rtol * abs(expected))


def _gen(cfg: RunConfig, k: int = 0) -> np.random.Generator:
    return RngStream(cfg.seed, 100 + k).generator()


# --------------------------------------------------------------------------- #


def sc_solve_linear(cfg):
    gen = _gen(cfg)
    m = gen.normal(size=(3, 2))
    a = gen.normal(size=(8, 8)) + 8 * np.eye(8)
    b = gen.normal(size=(8, 1))
    x = numerics.solve_linear(a, b)
    return [
        _close("identity A gives X = B", 0.0, np.max(np.abs(numerics.solve_linear(np.eye(3), m) - m)), atol=1e-15),
        _close("diag(2, 4) inverse", 0.0, np.max(np.abs(numerics.solve_linear(np.diag([2.0, 4.0]), np.eye(2)) - np.diag([0.5, 0.25]))), atol=1e-15),
        _row("residual <= 1e-10 |b|", 1e-10, float(np.linalg.norm(a @ x - b) / np.linalg.norm(b)), np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)),
    ]


def sc_heun(cfg):
    dt = 1e-3
    x1 = float(numerics.heun_sde_step(np.array([1.0]), lambda x: -x, 0.0, dt, None)[0])
    gen = _gen(cfg)
    x = np.zeros(1000)
    sigma = 1.0
    for _ in range(20000):
        x = numerics.heun_sde_step(x, lambda v: -v, sigma, 1e-2, gen)
    return [
        _close("zero drift keeps state", 0.0, float(np.abs(numerics.heun_sde_step(np.array([0.3]), lambda v: 0 * v, 0.0, dt, None) - 0.3)[0]), atol=0),
        _close("dx/dt = -x one step", 1 - dt + dt * dt / 2, x1, rtol=1e-12),
        _close("OU stationary variance sigma^2/2", 0.5, float(np.var(x)), rtol=0.1),
    ]


def sc_fixed_point(cfg):
    rows = [_close("f(x) = x returns x0", 0.3, numerics.fixed_point(lambda v: v, 0.3), atol=0)]
    rows.append(_close("Dottie number", 0.7390851332, numerics.fixed_point(math.cos, 0.5, tol=1e-10), atol=1e-9))
    try:
        numerics.fixed_point(lambda v: 2 * v, 1.0, max_iter=50)
        rows.append(_row("divergent map raises", "ConvergenceError", "returned", False))
    except numerics.ConvergenceError:
        rows.append(_row("divergent map raises", "ConvergenceError", "ConvergenceError", True))
    return rows


def sc_transmission(cfg):
    clean = transport.clean_wire()
    dev = transport.build_device(clean, 0.0, 0.0)
    mid = clean.fermi_energy
    opaque = transport.MtjTransportParams(barrier_height=60.0, exchange_splitting=0.0)
    t_op = transport.transmission(transport.build_device(opaque, 0.0, 0.0), [opaque.fermi_energy])[0]
    return [
        _close("clean wire T = 2", 2.0, transport.transmission(dev, [mid])[0], atol=1e-9),
        _row("opaque barrier T <= 1e-6", 1e-6, float(t_op), t_op <= 1e-6),
    ]


def sc_terminal_current(cfg):
    p = transport.MtjTransportParams(barrier_sites=4)
    zero = transport.current_at(p, 0.0, 0.0)
    clean = transport.clean_wire()
    g = transport.channel_conductance(clean, 0.0)
    res = transport.current_at(p, 0.0, 0.01)
    return [
        _close("zero bias, zero current", 0.0, zero.current, atol=1e-15),
        _close("clean wire dI/dV = 2e^2/h", 2 * G_QUANTUM, g, rtol=1e-3),
        _row("bond current = Landauer (1e-6)", 1e-6, res.relative_gap, res.relative_gap <= 1e-6),
    ]


def sc_mtj_conductance(cfg):
    pair = transport.ConductancePair(1.4416e-4, 1e-4)
    return [
        _close("theta = 0 gives G_P", pair.g_p, transport.mtj_conductance(pair, 0.0), atol=0),
        _close("theta = pi gives G_AP", pair.g_ap, transport.mtj_conductance(pair, math.pi), atol=0),
        _close("theta = pi/2 gives the mean", 0.5 * (pair.g_p + pair.g_ap), transport.mtj_conductance(pair, math.pi / 2), atol=0),
    ]


def sc_plates(cfg):
    dw, relu = magneto.dw_plate(), magneto.relu_plate()
    i_s, sigma = magneto.she_spin_current(dw, 1e-6)
    i_r, _ = magneto.she_spin_current(relu, 14.5e-6)
    return [
        _close("DW plate resistance", 1037.5, magneto.plate_resistance(dw), rtol=1e-9),
        _close("ReLU plate resistance", 1000.0, magneto.plate_resistance(relu), rtol=5e-3),
        _close("DW plate spin current", 37.5e-6, i_s, rtol=1e-9),
        _close("polarization is +y", 1.0, float(sigma[1]), atol=1e-15),
        _close("ReLU plate spin current", 5.205 * 14.5e-6, i_r, rtol=1e-3),
    ]


def sc_thermal_stability(cfg):
    return [
        _close(f"delta at {hk:g} Oe", d, magneto.thermal_stability(magneto.relu_magnet(hk)), rtol=1e-2)
        for d, hk in magneto.DELTA_VARIANTS_OE.items()
    ]


def sc_thermal_sigma(cfg):
    p = magneto.relu_magnet()
    s1, s2 = magneto.thermal_field_sigma(p, 1e-12), magneto.thermal_field_sigma(p, 0.5e-12)
    cold = magneto.thermal_field_sigma(magneto.relu_magnet(temperature=0.0), 1e-12)
    return [_close("T = 0 gives zero", 0.0, cold, atol=0), _close("halving dt scales by sqrt 2", math.sqrt(2), s2 / s1, rtol=1e-12)]


def sc_llgs(cfg):
    p = magneto.relu_magnet(temperature=0.0)
    hold = magneto.llgs_integrate(p, np.array([0.0, 0.0, 1.0]), np.zeros(3), 1e-9)
    i = np.array([0.0, 0.3, 0.0])
    m = magneto.static_state(i, p.alpha)
    return [
        _close("equilibrium stays at z", 1.0, float(hold.final[2]), atol=1e-12),
        _row("static residual < 1e-6", 1e-6, magneto.torque_residual(m, i, p.alpha), magneto.torque_residual(m, i, p.alpha) < 1e-6),
        _close("static balance mx mz = -i", -0.3, float(m[0] * m[2]), atol=1e-6),
    ]


def sc_dw_synapse(cfg):
    track = synapse.DwTrackParams()
    pair = crossbar.DEFAULT_PAIR
    mid = synapse.DwSynapse.centered(pair, track)
    right = synapse.apply_pulse(mid, track, synapse.WritePulse(100e-6, 2e-9))
    left = synapse.apply_pulse(mid, track, synapse.WritePulse(-100e-6, 2e-9))
    train = synapse.run_pulse_train(mid, track, [synapse.WritePulse(60e-6, 2e-9), synapse.WritePulse(-60e-6, 2e-9)])
    return [
        _close("v(100 uA) = 125 m/s", 125.0, synapse.dw_velocity(track, 100e-6), rtol=1e-12),
        _close("+100 uA moves centre to right edge", track.length, right.q, atol=1e-18),
        _close("-100 uA moves centre to left edge", 0.0, left.q, atol=1e-18),
        _close("zero-net-charge train returns", mid.q, train.q[-1], atol=1e-12),
        _close("full-swing write energy (J)", 20.75e-15, synapse.write_energy(synapse.WritePulse(100e-6, 2e-9), track), rtol=1e-12),
        _close("centre conductance is the mean", pair.g_parallel, synapse.read_conductance(mid), rtol=1e-15),
    ]


def sc_program_pulse(cfg):
    track = synapse.DwTrackParams()
    pair = crossbar.DEFAULT_PAIR
    mid = synapse.DwSynapse.centered(pair, track)
    pulse, _ = synapse.program_pulse_for(mid, track, pair.g_p - synapse.read_conductance(mid))
    zero, _ = synapse.program_pulse_for(mid, track, 0.0)
    _, sat = synapse.program_pulse_for(mid, track, pair.g_p)
    return [
        _close("zero change, zero current", 0.0, zero.amplitude, atol=0),
        _close("centre to G_P needs +100 uA", 100e-6, pulse.amplitude, rtol=1e-12),
        _row("beyond G_P saturates", True, sat, sat),
    ]


def sc_inverter(cfg):
    cell = circuits.variant_params(4.58)
    inv = cell.inverter
    v = np.asarray(circuits.inverter_transfer(np.linspace(0, cell.v_dd, 101), cell))
    return [
        _close("V_th maps to V_DD/2", cell.v_dd / 2, float(circuits.inverter_transfer(inv.v_th, cell)), rtol=1e-12),
        _row("V_in = 0 at the rail", 0.99 * cell.v_dd, float(circuits.inverter_transfer(0.0, cell)), circuits.inverter_transfer(0.0, cell) >= 0.99 * cell.v_dd),
        _row("monotone decreasing", True, bool(np.all(np.diff(v) <= 0)), bool(np.all(np.diff(v) <= 0))),
    ]


def sc_relu_dc(cfg):
    cell = circuits.variant_params(4.58)
    v = circuits.relu_dc_transfer(cell, np.array([0.0, 1.0, -1.0]) * cell.i0)
    return [
        _row("I_in = 0 gives <= 10 mV", 0.01, float(v[0]), v[0] <= 0.01),
        _close("I_in = I_0 gives V_DD", 0.5, float(v[1]), rtol=0.05),
        _row("I_in = -I_0 gives <= 10 mV", 0.01, float(v[2]), v[2] <= 0.01),
    ]


def sc_relu_transient(cfg):
    cell = circuits.variant_params(4.58)
    step = circuits.relu_transient(cell, 0.8 * cell.i0)
    half = circuits.relu_transient(cell, 0.5 * cell.i0)
    dead = circuits.relu_transient(cell, 0.0)
    return [
        _row("settles within 12 ns", 12e-9, step.settle_time, step.settle_time <= 12e-9),
        _row("power at u = 0.5 in 0.3-3 x 0.343 uW", 0.343e-6, half.average_power, 0.3 * 0.343e-6 <= half.average_power <= 3 * 0.343e-6),
        _row("zero input stays <= 10 mV", 0.01, float(dead.v_out.max()), dead.v_out.max() <= 0.01),
    ]


def sc_maxpool(cfg):
    mp = circuits.maxpool_params(circuits.variant_params(4.58))
    v_dd = mp.cell.v_dd
    tr = circuits.maxpool_transient(mp, np.array([0.9] + [0.2] * 8) * mp.cell.i0)
    dead = circuits.maxpool_transient(mp, -np.linspace(0.1, 0.9, 9) * mp.cell.i0)
    acc = circuits.maxpool_accuracy(mp, 100, RngStream(cfg.seed, 200))
    return [
        _row("winner index 0", 0, tr.winner, tr.winner == 0),
        _close("winner output 0.9 V_DD", 0.9 * v_dd, float(tr.window_mean[0]), rtol=0.05),
        _row("losers <= 25 mV", 0.025, float(tr.window_mean[1:].max()), tr.window_mean[1:].max() <= 0.025),
        _row("all negative: no winner", -1, dead.winner, dead.winner == -1 and dead.window_mean.max() <= 0.025),
        _close("noise-free winner = argmax (100 trials)", 1.0, acc, atol=0),
        _row("window power in 0.3-3 x 17.86 uW", 17.86e-6, tr.average_power, 0.3 * 17.86e-6 <= tr.average_power <= 3 * 17.86e-6),
    ]


def sc_circuit_error(cfg):
    cell = circuits.variant_params(4.58)
    cold = circuits.circuit_error(cell, "relu", n_mc=500, rng=RngStream(cfg.seed, 300), temperature=0.0)
    hot = circuits.circuit_error(cell, "relu", n_mc=500, rng=RngStream(cfg.seed, 300))
    return [
        _row("T = 0 error < 0.5%", 0.5, cold, cold < 0.5),
        _row("delta 4.58 ReLU error in [1, 6]%", 2.68, hot, 1.0 <= hot <= 6.0),
    ]


def sc_power(cfg):
    cell = circuits.variant_params(4.58)
    zero = circuits.CircuitTrace(np.arange(3.0), np.zeros(3), np.zeros(3), 0.0)
    r, v = 1e3, 0.2
    ohm = circuits.CircuitTrace(np.arange(3.0), np.full(3, v), np.full(3, v * v / r), 0.0)
    return [_close("all-zero trace gives 0 W", 0.0, circuits.average_power(zero), atol=0), _close("V^2/R", v * v / r, circuits.average_power(ohm), rtol=1e-15)]


def sc_crossbar(cfg):
    gen = _gen(cfg)
    w = gen.uniform(-1, 1, (4, 3))
    xb = crossbar.encode_weights(w)
    v = gen.uniform(-0.1, 0.1, 4)
    ref = v @ w * xb.g_unit
    zero = crossbar.encode_weights(np.zeros((1, 1)))
    return [
        _close("w = 0 at the mean conductance", zero.g_par, float(zero.g[0, 0]), atol=0),
        _close("decode round trip", 0.0, float(np.max(np.abs(crossbar.decode_weights(xb) - w))), atol=1e-12),
        _close("mvm = matmul", 0.0, float(np.max(np.abs(crossbar.mvm(xb, v) - ref)) / np.max(np.abs(ref))), atol=1e-10),
    ]


def sc_conv(cfg):
    ones = crossbar.conv2d(np.ones((5, 5, 1)), np.ones((3, 3, 1, 1)), padding=1)[..., 0]
    z = crossbar.zero_insert(np.array([[1.0, 2.0], [3.0, 4.0]])[..., None])[..., 0]
    x = _gen(cfg).normal(size=(4, 4, 2))
    d = crossbar.deconv2d(x, _gen(cfg, 1).normal(size=(3, 3, 2, 3)))
    return [
        _close("ones kernel centre", 9.0, float(ones[2, 2]), rtol=1e-12),
        _close("ones kernel corner", 4.0, float(ones[0, 0]), rtol=1e-12),
        _row("zero insertion layout", "1,2,3,4", ",".join(f"{z[i, j]:g}" for i, j in ((1, 1), (1, 3), (3, 1), (3, 3))), z.sum() == 10 and z.shape == (5, 5)),
        _row("deconv doubles the extent", "8x8", f"{d.shape[0]}x{d.shape[1]}", d.shape[:2] == (8, 8)),
    ]


def sc_behavioral(cfg):
    gen = _gen(cfg)
    y = hwnn.behavioral_relu(np.full(10_000, 0.5), 2.68, gen)
    p = hwnn.behavioral_maxpool(np.full((1, 3, 3, 1), 0.5), 3, 0.0)
    m = hwnn.behavioral_maxpool(np.arange(1, 10, dtype=float).reshape(1, 3, 3, 1) / 10, 3, 0.0)
    return [
        _row("ideal ReLU of [-1, 0, 2]", "[0, 0, 2]", str(hwnn.behavioral_relu([-1.0, 0.0, 2.0]).tolist()), hwnn.behavioral_relu([-1.0, 0.0, 2.0]).tolist() == [0, 0, 2]),
        _close("noisy ReLU mean", 0.5, float(y.mean()), atol=0.001),
        _close("noisy ReLU std", 0.0268, float(y.std()), rtol=0.05),
        _close("max of [1..9]/10", 0.9, float(m.max()), rtol=1e-15),
        _close("constant window", 0.5, float(p.max()), atol=0),
    ]


def sc_unet_counts(cfg):
    ref_cfg = hwnn.instance_counts(hwnn.UnetConfig.reference_scale())
    targets = {"synapses": 4.65e6, "relu": 21.45e6, "maxpool": 2.33e6}
    rows = [_close(f"reference-scale {k} within 15%", v, ref_cfg[k], rtol=0.15) for k, v in targets.items()]
    m = hwnn.build_unet(hwnn.UnetConfig(depth=1, base=4))
    probs, _ = hwnn.forward(m, _gen(cfg).uniform(size=(32, 32, 3)), hwnn.HardwareProfile.ideal())
    rows.append(_row("decoder output size = input", "32x32", f"{probs.shape[0]}x{probs.shape[1]}", probs.shape[:2] == (32, 32)))
    rows.append(_close("probabilities sum to 1", 0.0, float(np.max(np.abs(probs.sum(-1) - 1))), atol=1e-6))
    return rows


def sc_energy(cfg):
    rep = hwnn.energy_report(hwnn.EnergyLedger(), hwnn.HardwareProfile.for_delta(4.58), hwnn.REFERENCE_SCHEDULE)
    zero = hwnn.energy_report(hwnn.EnergyLedger(), hwnn.HardwareProfile.for_delta(4.58), hwnn.Schedule(0, 369, 1.55e-6))
    return [
        _close("150 x 369 x 1.55 uJ (mJ)", 85.79, rep["top_down_total_mJ"], atol=5e-3),
        _close("variant energy ratio", 9.57, rep["variant_ratio_45.81_over_4.58"], atol=0.01),
        _close("zero epochs", 0.0, zero["top_down_total_J"], atol=0),
    ]


def sc_shapes(cfg):
    one = generate_shapes(1, 32, 2, cfg.seed)
    a = generate_shapes(3, 32, 3, cfg.seed)
    b = generate_shapes(3, 32, 3, cfg.seed)
    hist = generate_shapes(500, 32, 6, cfg.seed).class_histogram()
    return [
        _row("one image, two classes", "[0, 1]", str(np.unique(one.labels).tolist()), np.unique(one.labels).tolist() == [0, 1]),
        _row("same seed, same data", True, bool(np.array_equal(a.images, b.images) and np.array_equal(a.labels, b.labels)), np.array_equal(a.images, b.images)),
        _row("every class >= 5% of pixels", 0.05, float(hist.min()), hist.min() >= 0.05),
    ]


def sc_camvid_layout(cfg):
    rows = []
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        (root / "images").mkdir()
        (root / "labels").mkdir()
        try:
            load_camvid_layout(root)
            rows.append(_row("empty dir rejected", "error", "loaded", False))
        except ValueError:
            rows.append(_row("empty dir rejected", "error", "error", True))
        colors = {"#000000": 0, "#ff0000": 1, "#00ff00": 2}
        (root / "classes.json").write_text(json.dumps(colors))
        gen = _gen(cfg)
        pal = np.array([[0, 0, 0], [255, 0, 0], [0, 255, 0]], dtype=np.uint8)
        for k in range(7):
            Image.fromarray((gen.uniform(size=(8, 8, 3)) * 255).astype(np.uint8)).save(root / "images" / f"f{k}.png")
            Image.fromarray(pal[gen.integers(0, 3, (8, 8))]).save(root / "labels" / f"f{k}.png")
        ds = load_camvid_layout(root)
        got = [int(np.sum(ds.splits == s)) for s in ("train", "val", "test")]
        rows.append(_row("7 images split 4/1/2", "[4, 1, 2]", str(got), got == [4, 1, 2]))
    return rows


SCENARIOS: dict[str, tuple[str, Callable[[RunConfig], list[Row]]]] = {
    "solve-linear": ("dense solve identities and residual", sc_solve_linear),
    "heun-step": ("stochastic Heun step and OU variance", sc_heun),
    "fixed-point": ("damped fixed-point iteration", sc_fixed_point),
    "transmission": ("clean-wire and opaque-barrier transmission", sc_transmission),
    "terminal-current": ("equilibrium, conductance quantum, dual route", sc_terminal_current),
    "mtj-conductance": ("angle dependence endpoints", sc_mtj_conductance),
    "she-plates": ("plate resistance and spin current", sc_plates),
    "thermal-stability": ("barrier of the three magnet variants", sc_thermal_stability),
    "thermal-sigma": ("thermal field scaling", sc_thermal_sigma),
    "llgs": ("fixed point and static balance", sc_llgs),
    "dw-synapse": ("wall motion, conductance and write energy", sc_dw_synapse),
    "program-pulse": ("conductance target to write pulse", sc_program_pulse),
    "inverter": ("inverter transfer", sc_inverter),
    "relu-dc": ("ReLU DC transfer", sc_relu_dc),
    "relu-transient": ("ReLU settling, power, dead branch", sc_relu_transient),
    "maxpool": ("winner-take-all behaviour", sc_maxpool),
    "circuit-error": ("ReLU Monte Carlo error", sc_circuit_error),
    "power": ("power accounting identities", sc_power),
    "crossbar": ("weight encoding and MVM", sc_crossbar),
    "conv": ("convolution, zero insertion, deconvolution", sc_conv),
    "behavioral": ("noisy ReLU and fused max-pool", sc_behavioral),
    "unet-counts": ("instance counts and forward shape", sc_unet_counts),
    "energy": ("energy report arithmetic", sc_energy),
    "shapes": ("synthetic dataset construction", sc_shapes),
    "camvid-layout": ("directory loader and split", sc_camvid_layout),
}


def run_scenario(name: str, cfg: RunConfig) -> list[Row]:
    try:
        return SCENARIOS[name][1](cfg)
    except KeyError:
        raise KeyError(f"unknown scenario '{name}'; available: {', '.join(SCENARIOS)}") from None
