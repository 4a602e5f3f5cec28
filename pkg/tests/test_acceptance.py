"""Acceptance suite A1-A9; each criterion prints one PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from oracles import direct_conv2d, direct_transposed_conv2d
from spinsim import circuits, crossbar, hwnn, magneto, synapse, transport
from spinsim.constants import G_QUANTUM
from spinsim.harness.cli import main
from spinsim.harness.commands import STREAM_INIT, STREAM_TRAIN
from spinsim.harness.data import generate_shapes
from spinsim.numerics import RngStream

SEED = 0


@pytest.fixture
def report(capsys):
    def emit(name: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n{name} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


def test_a1_transport_dual_route(report):
    t0 = time.perf_counter()
    res = transport.current_at(transport.MtjTransportParams(barrier_sites=20), 0.0, 0.01)
    g = transport.channel_conductance(transport.clean_wire(), 0.0)
    dt = time.perf_counter() - t0
    dev = abs(g / (2 * G_QUANTUM) - 1)
    ok = res.relative_gap <= 1e-6 and dev <= 1e-3 and dt < 10
    report("A1", ok, f"route gap {res.relative_gap:.2e}, clean-wire dI/dV off by {dev:.2e}, {dt:.1f} s")


def test_a2_conductance_endpoints(report):
    pair = transport.conductance_pair(transport.MtjTransportParams())
    g = [transport.mtj_conductance(pair, th) for th in (0.0, math.pi, math.pi / 2)]
    ok = g[0] == pair.g_p and g[1] == pair.g_ap and g[2] == 0.5 * (pair.g_p + pair.g_ap)
    report("A2", ok, f"G(0) = {g[0]:.6e}, G(pi) = {g[1]:.6e}, G(pi/2) = {g[2]:.6e} S")


def test_a3_plates_and_stability(report):
    r_dw, r_relu = magneto.plate_resistance(magneto.dw_plate()), magneto.plate_resistance(magneto.relu_plate())
    deltas = {d: magneto.thermal_stability(magneto.relu_magnet(hk)) for d, hk in magneto.DELTA_VARIANTS_OE.items()}
    ok = abs(r_dw - 1037.5) <= 1e-9 * 1037.5 and abs(r_relu - 1000) <= 5.0
    ok = ok and all(abs(got - d) <= 0.01 * d for d, got in deltas.items())
    shown = ", ".join(f"{got:.2f}" for got in deltas.values())
    report("A3", ok, f"R_dw = {r_dw:.4f} ohm, R_relu = {r_relu:.2f} ohm, delta = {shown}")


def test_a4_domain_wall_synapse(report):
    t0 = time.perf_counter()
    track, pair = synapse.DwTrackParams(), crossbar.DEFAULT_PAIR
    mid = synapse.DwSynapse.centered(pair, track)
    moves = [synapse.apply_pulse(mid, track, synapse.WritePulse(a, 2e-9)).q - mid.q for a in (100e-6, -100e-6)]
    half = moves[0] == 0.5 * track.length and moves[1] == -0.5 * track.length
    amps = np.linspace(-100e-6, 100e-6, 21)
    g = np.array([synapse.read_conductance(synapse.apply_pulse(mid, track, synapse.WritePulse(a, 2e-9))) for a in amps])
    resid = g - np.polyval(np.polyfit(amps, g, 1), amps)
    r2 = 1 - np.sum(resid**2) / np.sum((g - g.mean()) ** 2)
    start = synapse.DwSynapse(0.3 * track.length, pair)
    pulses = [synapse.WritePulse(a, 2e-9) for a in (60e-6, -30e-6, -30e-6)]
    ret = synapse.run_pulse_train(start, track, pulses).g[-1]
    back = abs(ret / synapse.read_conductance(start) - 1)
    dt = time.perf_counter() - t0
    ok = half and r2 > 0.999 and back <= 0.01 and dt < 5
    report("A4", ok, f"half-track moves {half}, R^2 = {r2:.6f}, train return {back:.1e}, {dt:.2f} s")


def test_a5_circuits(report):
    t0 = time.perf_counter()
    cell = circuits.variant_params(4.58)
    mp = circuits.maxpool_params(cell)
    clean = circuits.maxpool_accuracy(mp, 1000, RngStream(SEED, 50), dt=1e-12)
    noisy = circuits.maxpool_accuracy(mp, 200, RngStream(SEED, 51), temperature=300.0, min_gap=0.1, dt=1e-12)
    errs = {}
    for which in ("relu", "maxpool"):
        errs[which] = [circuits.circuit_error(cell, which, d, 500, RngStream(SEED, 52)) for d in (4.58, 30.26, 45.81)]
    dt = time.perf_counter() - t0
    falling = all(e[0] > e[1] > e[2] for e in errs.values())
    ok = clean == 1.0 and noisy >= 0.99 and falling and 1.0 <= errs["relu"][0] <= 6.0 and dt < 600
    shown = "; ".join(f"{k} " + "/".join(f"{v:.3f}" for v in e) + "%" for k, e in errs.items())
    report("A5", ok, f"noise-free {clean:.3f}, 300 K {noisy:.3f}, errors {shown}, {dt:.0f} s")


def test_a6_crossbar_equivalence(report):
    gen = np.random.default_rng(SEED)
    worst_c = worst_d = 0.0
    extent = True
    for _ in range(50):
        h, w = gen.integers(3, 8, 2)
        cin, cout = (int(v) for v in gen.integers(1, 4, 2))
        k = int(gen.choice([1, 3, 5]))
        x = gen.normal(size=(h, w, cin))
        kern = gen.normal(size=(k, k, cin, cout))
        worst_c = max(worst_c, float(np.max(np.abs(crossbar.conv2d(x, kern, 1, k // 2) - direct_conv2d(x, kern, 1, k // 2)))))
        y = gen.normal(size=(h, w, cin))
        d = crossbar.deconv2d(y, kern)
        extent &= d.shape == (2 * h, 2 * w, cout)
        ref = direct_transposed_conv2d(y, kern[::-1, ::-1].transpose(0, 1, 3, 2))
        worst_d = max(worst_d, float(np.max(np.abs(d - ref))))
    ok = worst_c <= 1e-9 and worst_d <= 1e-9 and extent
    report("A6", ok, f"max |conv - oracle| {worst_c:.1e}, max |deconv - oracle| {worst_d:.1e}, 2x extent {extent}")


TOY = hwnn.UnetConfig(input_size=32, in_channels=3, n_classes=3, depth=2, base=8)


@pytest.fixture(scope="module")
def toy_runs():
    ds = generate_shapes(200, 32, 3, seed=1)
    tr, te = ds.subset("train"), ds.subset("test")
    runs = {}
    for key, prof in (("float", hwnn.HardwareProfile.ideal()), (4.58, hwnn.HardwareProfile.for_delta(4.58)), (45.81, hwnn.HardwareProfile.for_delta(45.81))):
        t0 = time.perf_counter()
        cfg = TOY if key == "float" else hwnn.UnetConfig(**{**TOY.__dict__, "delta": key})
        model = hwnn.build_unet(cfg, RngStream(SEED, STREAM_INIT).generator())
        hist, _ = hwnn.train(model, tr.images, tr.labels, hwnn.TrainConfig(epochs=30), prof, RngStream(SEED, STREAM_TRAIN).generator())
        acc, _, _ = hwnn.evaluate(model, te.images, te.labels, prof, np.random.default_rng(SEED))
        runs[key] = (acc, hist, time.perf_counter() - t0)
    return runs


def test_a7_toy_segmentation(report, toy_runs):
    base, lo, hi = (toy_runs[k][0] for k in ("float", 4.58, 45.81))
    dt = sum(r[2] for r in toy_runs.values())
    ok = base >= 0.92 and abs(lo - base) <= 0.02 and abs(hi - base) <= 0.01 and dt < 1800
    report("A7", ok, f"float {100 * base:.2f}%, delta 4.58 {100 * lo:.2f}%, delta 45.81 {100 * hi:.2f}%, {dt:.0f} s")


def test_a8_energy(report, toy_runs):
    prof = hwnn.HardwareProfile.for_delta(4.58)
    rep = hwnn.energy_report(hwnn.EnergyLedger(), prof, hwnn.REFERENCE_SCHEDULE)
    exact = rep["top_down_total_J"] == 150 * 369 * 1.55e-6 and round(rep["top_down_total_mJ"], 2) == 85.79
    ratio = rep["variant_ratio_45.81_over_4.58"]
    energy = np.array([h.write_energy for h in toy_runs[4.58][1]])
    tail = hwnn.smoothed(energy, 3)[len(energy) // 2 :]
    rises = np.diff(tail) / tail[:-1]
    trend = bool(np.all(rises <= 0))
    ok = exact and abs(ratio - 9.57) <= 0.01 and trend
    report(
        "A8",
        ok,
        f"{rep['top_down_total_mJ']:.4f} mJ, ratio {ratio:.4f}, smoothed write energy {tail[0]:.3e} -> {tail[-1]:.3e} J, "
        f"largest late step {100 * rises.max():+.1f}%",
    )


def test_a9_manifest_replay(report, tmp_path):
    runs = [["scenario", "heun-step"], ["scenario", "behavioral"], ["scenario", "crossbar"], ["dw-pulse"], ["llgs-run"]]
    cfg = tmp_path / "train.toml"
    cfg.write_text("[hwnn]\ninput_size = 16\ndepth = 1\nbase = 2\n[dataset]\nn = 8\nsize = 16\n[train]\nepochs = 2\n")
    runs.append(["train", "--config", str(cfg)])
    bad = []
    compared = 0
    for k, argv in enumerate(runs):
        first, second = tmp_path / f"a{k}", tmp_path / f"b{k}"
        assert main([*argv, "--seed", "123", "--out", str(first)]) == 0
        replay = [argv[0], *(argv[1:2] if argv[0] == "scenario" else []), "--config", str(first / "manifest.json"), "--out", str(second)]
        assert main(replay) == 0
        for csv in sorted(first.rglob("*.csv")):
            compared += 1
            if csv.read_bytes() != (second / csv.relative_to(first)).read_bytes():
                bad.append(str(csv.relative_to(tmp_path)))
    report("A9", not bad and compared > 0, f"{compared} CSV files replayed, mismatches: {bad or 'none'}")
