"""Subcommand bodies. Each takes the resolved config and an output directory
and returns the artifact paths it wrote."""

from __future__ import annotations

import json
import math
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .. import circuits, hwnn, magneto, synapse, transport
from ..crossbar import load_tensor, save_tensor
from ..numerics import RngStream
from .config import ConfigError, RunConfig
from .data import SegDataset, generate_shapes, load_camvid_layout, load_dataset
from .io import write_csv, write_json, write_label_png

# stream ids keep every consumer of the run seed independent
STREAM_LLGS, STREAM_MAXPOOL, STREAM_ERROR, STREAM_INIT, STREAM_TRAIN, STREAM_EVAL = range(1, 7)


def _gen(cfg: RunConfig, stream: int) -> np.random.Generator:
    return RngStream(cfg.seed, stream).generator()


def transport_params(cfg: RunConfig) -> transport.MtjTransportParams:
    names = {f.name for f in fields(transport.MtjTransportParams)}
    return transport.MtjTransportParams(**{k: v for k, v in cfg["transport"].items() if k in names})


def unet_config(cfg: RunConfig) -> tuple[hwnn.UnetConfig, hwnn.HardwareProfile]:
    h = dict(cfg["hwnn"])
    ideal = h.pop("ideal")
    try:
        ucfg = hwnn.UnetConfig(**h, w_max=cfg["crossbar"]["w_max"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    profile = hwnn.HardwareProfile.ideal() if ideal else hwnn.HardwareProfile.for_delta(ucfg.delta)
    return ucfg, profile


def train_config(cfg: RunConfig) -> hwnn.TrainConfig:
    try:
        return hwnn.TrainConfig(**cfg["train"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def dataset(cfg: RunConfig) -> SegDataset:
    d = cfg["dataset"]
    try:
        if d["kind"] == "shapes":
            return generate_shapes(d["n"], d["size"], d["classes"], d["seed"])
        if d["kind"] == "camvid":
            return load_camvid_layout(d["path"])
        if d["kind"] == "saved":
            return load_dataset(d["path"])
    except (ValueError, OSError) as exc:
        raise ConfigError(f"dataset: {exc}") from None
    raise ConfigError(f"dataset.kind must be shapes, camvid or saved, got '{d['kind']}'")


# --------------------------------------------------------------------------- #
# device-level commands


def characterize_mtj(cfg: RunConfig, out: Path) -> list[Path]:
    """Conductance pair, angle sweep and the dual-route current at the configured bias."""
    p = transport_params(cfg)
    pair = transport.conductance_pair(p)
    theta = np.linspace(0.0, math.pi, cfg["transport"]["theta_points"])
    g = np.asarray(transport.mtj_conductance(pair, theta), dtype=float)
    res = transport.current_at(p, 0.0, cfg["transport"]["bias"])
    a = write_csv(out / "mtj_conductance.csv", {"theta_rad": theta, "conductance_S": g})
    b = write_json(
        out / "mtj_summary.json",
        {
            "g_p_S": pair.g_p,
            "g_ap_S": pair.g_ap,
            "tmr": pair.tmr,
            "bias_V": cfg["transport"]["bias"],
            "current_operator_A": res.current_op,
            "landauer_A": res.landauer,
            "relative_gap": res.relative_gap,
            "energy_points": res.n_points,
        },
    )
    return [a, b]


def llgs_run(cfg: RunConfig, out: Path) -> list[Path]:
    m = cfg["magneto"]
    p = magneto.relu_magnet(m["hk_oe"], m["temperature"])
    gen = _gen(cfg, STREAM_LLGS) if p.temperature > 0 else None
    tr = magneto.llgs_integrate(p, np.asarray(m["m0"]), np.asarray(m["i_s"]), m["duration"], m["dt"], gen, m["sample_every"])
    path = write_csv(out / "llgs_trajectory.csv", {"t_s": tr.t, "mx": tr.m[:, 0], "my": tr.m[:, 1], "mz": tr.m[:, 2]})
    meta = write_json(
        out / "llgs_summary.json",
        {"delta": magneto.thermal_stability(p), "final_m": tr.final, "time_scale_s": p.time_scale},
    )
    return [path, meta]


def dw_pulse(cfg: RunConfig, out: Path) -> list[Path]:
    """Pulse-train trace and the amplitude-vs-conductance sweep from the track centre."""
    s = cfg["synapse"]
    track = synapse.DwTrackParams(pulse_duration=s["pulse_duration"])
    pair = hwnn.DEFAULT_PAIR
    s0 = synapse.DwSynapse(s["q0_fraction"] * track.length, pair, track.length)
    try:
        pulses = [synapse.WritePulse(a, track.pulse_duration) for a in s["amplitudes"]]
    except ValueError as exc:
        raise ConfigError(f"synapse.amplitudes: {exc}") from None
    tr = synapse.run_pulse_train(s0, track, pulses, s["samples_per_pulse"])
    a = write_csv(out / "dw_pulse_train.csv", {"t_s": tr.t, "q_m": tr.q, "conductance_S": tr.g})
    amps = np.linspace(-100e-6, 100e-6, 21)
    mid = synapse.DwSynapse.centered(pair, track)
    g = [synapse.read_conductance(synapse.apply_pulse(mid, track, synapse.WritePulse(x, track.pulse_duration))) for x in amps]
    e = [synapse.write_energy(synapse.WritePulse(x, track.pulse_duration), track) for x in amps]
    b = write_csv(out / "dw_amplitude_sweep.csv", {"amplitude_A": amps, "conductance_S": g, "write_energy_J": e})
    c = write_json(out / "dw_summary.json", {"train_energy_J": tr.energy, "final_q_m": tr.q[-1], "initial_q_m": s0.q})
    return [a, b, c]


def _cell(cfg: RunConfig) -> circuits.ReluCircuitParams:
    try:
        return circuits.variant_params(cfg["circuits"]["delta"])
    except ValueError as exc:
        raise ConfigError(f"circuits.delta: {exc}") from None


def relu_sweep(cfg: RunConfig, out: Path) -> list[Path]:
    c = cfg["circuits"]
    cell = _cell(cfg)
    u = np.linspace(-1.0, 1.0, c["points"])
    v = circuits.relu_dc_transfer(cell, u * cell.i0)
    a = write_csv(out / "relu_transfer.csv", {"u": u, "i_in_A": u * cell.i0, "v_out_V": v, "ideal_V": circuits.ideal_relu(u, cell.v_dd)})
    rng = RngStream(cfg.seed, STREAM_ERROR)
    tr = circuits.relu_transient(cell, 0.8 * cell.i0, temperature=c["temperature"], rng=rng, dt=c["dt"])
    b = write_csv(out / "relu_transient.csv", {"t_s": tr.t, "v_out_V": tr.v_out, "power_W": tr.power})
    summary = {"delta": c["delta"], "settle_time_s": tr.settle_time, "average_power_W": tr.average_power}
    if c["n_mc"]:
        try:
            summary["error_pct"] = circuits.circuit_error(cell, "relu", None, c["n_mc"], rng.child(7), c["temperature"], c["dt"])
        except ValueError as exc:
            raise ConfigError(f"circuits.n_mc: {exc}") from None
    return [a, b, write_json(out / "relu_summary.json", summary)]


def maxpool_sweep(cfg: RunConfig, out: Path) -> list[Path]:
    c = cfg["circuits"]
    mp = circuits.maxpool_params(_cell(cfg))
    stream = RngStream(cfg.seed, STREAM_MAXPOOL)
    u = circuits.maxpool_inputs(stream.child(0).generator(), c["n_trials"], min_gap=c["min_gap"])
    tr = circuits.maxpool_transient(mp, u * mp.cell.i0, temperature=c["temperature"], rng=stream.child(1), dt=c["dt"])
    cols = {f"u{k}": u[:, k] for k in range(9)}
    cols.update(
        argmax=np.argmax(u, axis=1),
        winner=tr.winner,
        v_max_V=tr.window_mean.max(axis=1),
        ideal_V=circuits.ideal_relu(u.max(axis=1), mp.cell.v_dd),
        settle_s=tr.settle_time,
    )
    a = write_csv(out / "maxpool_trials.csv", cols)
    demo = circuits.maxpool_transient(mp, np.array([0.9] + [0.2] * 8) * mp.cell.i0)
    b = write_csv(out / "maxpool_transient.csv", {"t_s": demo.t, **{f"v{k}_V": demo.v_out[:, k] for k in range(9)}})
    summary = {
        "delta": c["delta"],
        "accuracy": float(np.mean(tr.winner == np.argmax(u, axis=1))),
        "rms_error_pct": float(100 * np.sqrt(np.mean((cols["v_max_V"] - cols["ideal_V"]) ** 2)) / mp.cell.v_dd),
        "average_power_W": float(np.mean(tr.average_power)),
    }
    if c["n_mc"]:
        try:
            summary["error_pct"] = circuits.circuit_error(mp, "maxpool", None, c["n_mc"], stream.child(7), c["temperature"], c["dt"])
        except ValueError as exc:
            raise ConfigError(f"circuits.n_mc: {exc}") from None
    return [a, b, write_json(out / "maxpool_summary.json", summary)]


# --------------------------------------------------------------------------- #
# network commands


def save_model(model: hwnn.Unet, directory: Path) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, lay in model.layers.items():
        p = directory / f"{name}.bin"
        save_tensor(p, lay.xbar.g)
        paths.append(p)
    paths.append(write_json(directory / "model.json", {"config": model.cfg.__dict__, "layers": list(model.layers)}))
    return paths


def load_model(directory: Path, cfg: hwnn.UnetConfig) -> hwnn.Unet:
    meta = json.loads((directory / "model.json").read_text())
    saved = hwnn.UnetConfig(**meta["config"])
    if replace(saved, delta=cfg.delta) != cfg:
        raise ConfigError("saved model topology does not match the hwnn configuration")
    model = hwnn.build_unet(cfg)
    for name, lay in model.layers.items():
        g = load_tensor(directory / f"{name}.bin")
        if g.shape != lay.xbar.g.shape:
            raise ConfigError(f"weight file {name}.bin has shape {g.shape}, expected {lay.xbar.g.shape}")
        lay.xbar.g = g
    return model


def _predictions(out: Path, ds: SegDataset, pred: np.ndarray) -> list[Path]:
    d = out / "predictions"
    d.mkdir(exist_ok=True)
    return [write_label_png(d / f"{name}.png", p) for name, p in zip(ds.names, pred)]


def train_cmd(cfg: RunConfig, out: Path) -> list[Path]:
    ucfg, profile = unet_config(cfg)
    ds = dataset(cfg)
    if ds.images.shape[1:] != (ucfg.input_size, ucfg.input_size, ucfg.in_channels) or ds.n_classes != ucfg.n_classes:
        raise ConfigError("dataset shape or class count does not match the hwnn configuration")
    tr, te = ds.subset("train"), ds.subset("test")
    model = hwnn.build_unet(ucfg, _gen(cfg, STREAM_INIT))
    history, ledger = hwnn.train(model, tr.images, tr.labels, train_config(cfg), profile, _gen(cfg, STREAM_TRAIN))
    acc, pred, inf = hwnn.evaluate(model, te.images, te.labels, profile, _gen(cfg, STREAM_EVAL))
    arts = [
        write_csv(
            out / "metrics.csv",
            {
                "epoch": [h.epoch for h in history],
                "loss": [h.loss for h in history],
                "pixel_accuracy": [h.pixel_accuracy for h in history],
                "write_energy_J": [h.write_energy for h in history],
                "clipped": [h.clipped for h in history],
            },
        ),
        write_json(out / "ledger.json", {"train": ledger.to_dict(), "test_inference": inf.to_dict(), "test_pixel_accuracy": acc}),
    ]
    arts += save_model(model, out / "weights")
    arts += _predictions(out, te, pred)
    return arts


def eval_cmd(cfg: RunConfig, out: Path) -> list[Path]:
    ucfg, profile = unet_config(cfg)
    if not cfg["model"]["weights"]:
        raise ConfigError("eval needs model.weights (a weights directory written by train)")
    try:
        model = load_model(Path(cfg["model"]["weights"]), ucfg)
    except OSError as exc:
        raise ConfigError(f"model.weights: {exc}") from None
    te = dataset(cfg).subset("test")
    acc, pred, inf = hwnn.evaluate(model, te.images, te.labels, profile, _gen(cfg, STREAM_EVAL))
    arts = [write_json(out / "eval.json", {"pixel_accuracy": acc, "images": len(te), "ledger": inf.to_dict()})]
    return arts + _predictions(out, te, pred)


def energy_report_cmd(cfg: RunConfig, out: Path) -> list[Path]:
    ucfg, profile = unet_config(cfg)
    e = cfg["energy"]
    try:
        sched = hwnn.Schedule(e["epochs"], e["images_per_epoch"], e["per_image_energy"])
    except ValueError as exc:
        raise ConfigError(f"energy: {exc}") from None
    rep = hwnn.energy_report(hwnn.EnergyLedger(), profile, sched, ucfg)
    ref_cfg = hwnn.UnetConfig.reference_scale()
    rows = []
    for delta in sorted(hwnn.VARIANT_ERRORS):
        prof = hwnn.HardwareProfile.for_delta(delta)
        r = hwnn.energy_report(hwnn.EnergyLedger(), prof, sched, ref_cfg)
        rows.append((delta, r["count_model_per_image_J"], r["critical_path_s"], hwnn.VARIANT_TOTALS_MJ[delta]))
    rep["reference_scale_counts"] = hwnn.instance_counts(ref_cfg)
    a = write_json(out / "energy_report.json", rep)
    b = write_csv(
        out / "energy_variants.csv",
        {
            "delta": [r[0] for r in rows],
            "count_model_per_image_J": [r[1] for r in rows],
            "critical_path_s": [r[2] for r in rows],
            "reference_total_mJ": [r[3] for r in rows],
        },
    )
    return [a, b]
