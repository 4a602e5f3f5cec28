"""Strict TOML run configuration: every key must exist in the default schema."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    """Malformed or unknown configuration (CLI exit code 2)."""


DEFAULTS: dict = {
    "seed": 0,
    "threads": 1,
    "transport": {
        "lattice_spacing": 0.25e-9,
        "barrier_sites": 8,
        "m_fm": 0.73,
        "m_barrier": 0.18,
        "fermi_energy": 2.25,
        "exchange_splitting": 2.15,
        "barrier_height": 0.76,
        "area": 14.4e-9 * 69.4e-9,
        "temperature": 300.0,
        "bias": 0.01,
        "theta_points": 7,
    },
    "magneto": {
        "hk_oe": 330.0,
        "temperature": 300.0,
        "i_s": [0.0, 0.3, 0.0],
        "m0": [0.0, 0.0, 1.0],
        "duration": 5e-9,
        "dt": 1e-12,
        "sample_every": 10,
    },
    "synapse": {
        "amplitudes": [60e-6, -30e-6, -30e-6],
        "pulse_duration": 2e-9,
        "q0_fraction": 0.5,
        "samples_per_pulse": 20,
    },
    "circuits": {
        "delta": 4.58,
        "temperature": 300.0,
        "points": 21,
        "n_trials": 50,
        "min_gap": 0.1,
        "n_mc": 0,  # circuit_error Monte Carlo size (0 skips, else >= 500)
        "dt": 0.5e-12,
    },
    "crossbar": {
        "w_max": 1.0,
        "program_sigma": 0.0,
        "read_sigma": 0.0,
    },
    "hwnn": {
        "input_size": 32,
        "in_channels": 3,
        "n_classes": 3,
        "depth": 2,
        "base": 8,
        "kernel": 3,
        "pool": 3,
        "convs_per_stage": 2,
        "deconv_relu": True,
        "delta": 4.58,
        "ideal": False,
    },
    "train": {
        "epochs": 30,
        "lr": 0.05,
        "lr_decay": 0.85,
        "momentum": 0.9,
        "batch": 4,
    },
    "dataset": {
        "kind": "shapes",  # shapes | camvid | saved
        "path": "",
        "n": 200,
        "size": 32,
        "classes": 3,
        "seed": 1,
    },
    "energy": {
        "epochs": 150,
        "images_per_epoch": 369,
        "per_image_energy": 1.55e-6,
    },
    "model": {
        "weights": "",  # directory of saved weights for eval
    },
}


def _check(user: dict, schema: dict, path: str) -> dict:
    out = copy.deepcopy(schema)
    for key, val in user.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown configuration key '{where}'")
        ref = schema[key]
        if isinstance(ref, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{where}' must be a table")
            out[key] = _check(val, ref, where)
            continue
        if isinstance(ref, bool):
            ok = isinstance(val, bool)
        elif isinstance(ref, int):
            ok = isinstance(val, int) and not isinstance(val, bool)
        elif isinstance(ref, float):
            ok = isinstance(val, (int, float)) and not isinstance(val, bool)
            val = float(val) if ok else val
        elif isinstance(ref, list):
            ok = isinstance(val, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val)
            val = [float(v) for v in val] if ok else val
        else:
            ok = isinstance(val, str)
        if not ok:
            raise ConfigError(f"'{where}' has the wrong type ({type(val).__name__}, expected {type(ref).__name__})")
        out[key] = val
    return out


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    source: str = ""

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def with_overrides(self, seed: int | None = None, threads: int | None = None) -> "RunConfig":
        vals = copy.deepcopy(self.values)
        if seed is not None:
            if seed < 0 or seed >= 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
            vals["seed"] = seed
        if threads is not None:
            if threads < 1:
                raise ConfigError("threads must be at least 1")
            vals["threads"] = threads
        return RunConfig(vals, self.source)

    def to_json(self) -> str:
        return json.dumps(self.values, indent=1, sort_keys=True)


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """TOML text, or JSON when ``source`` ends in .json (a run manifest replays its config)."""
    try:
        if source.endswith(".json"):
            raw = json.loads(text)
            if isinstance(raw, dict) and "artifacts" in raw and "config" in raw:
                raw = raw["config"]
        else:
            raw = tomllib.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a table")
    cfg = RunConfig(_check(raw, DEFAULTS, ""), source)
    if cfg.seed < 0:
        raise ConfigError("seed must be non-negative")
    if cfg["threads"] < 1:
        raise ConfigError("threads must be at least 1")
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config(text, str(p))
