"""Run outputs: CSV tables, JSON documents, indexed PNG label maps, manifests and locks."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np
from PIL import Image

from .config import ConfigError


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer, np.bool_)):
        return str(v.item())
    return str(v)


def write_csv(path: str | Path, columns: dict) -> Path:
    """Columns of equal length, floats written with round-trip repr."""
    path = Path(path)
    names = list(columns)
    cols = [np.asarray(columns[n]).ravel() if np.ndim(columns[n]) else np.asarray([columns[n]]) for n in names]
    n = {len(c) for c in cols}
    if len(n) > 1:
        raise ValueError(f"columns have different lengths: {dict(zip(names, map(len, cols)))}")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([_cell(v) for v in row])
    return path


def write_rows(path: str | Path, rows: list[dict]) -> Path:
    if not rows:
        raise ValueError("no rows to write")
    return write_csv(path, {k: [r[k] for r in rows] for k in rows[0]})


def read_csv(path: str | Path) -> dict[str, list[str]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return {name: [r[i] for r in rows[1:]] for i, name in enumerate(rows[0])}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    return obj


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n")
    return path


def _palette(n: int) -> list[int]:
    gen = np.random.default_rng(12345)
    pal = gen.integers(0, 256, (256, 3))
    pal[0] = 0
    return pal.astype(np.uint8).ravel().tolist()


def write_label_png(path: str | Path, labels: np.ndarray) -> Path:
    """Palette ('P' mode) PNG whose pixel values are the class indices."""
    lab = np.asarray(labels)
    if lab.ndim != 2 or lab.min(initial=0) < 0 or lab.max(initial=0) > 255:
        raise ValueError("label map must be 2-D with classes in 0..255")
    img = Image.fromarray(lab.astype(np.uint8), mode="P")
    img.putpalette(_palette(256))
    img.save(path, format="PNG", optimize=False)
    return Path(path)


def read_label_png(path: str | Path) -> np.ndarray:
    img = Image.open(path)
    if img.mode != "P":
        raise ValueError(f"{path} is not a palette image")
    return np.asarray(img, dtype=np.int64)


def sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, command: list[str], config: dict, artifacts: list[Path]) -> Path:
    """Resolved config, seed, command line and SHA-256 of every artifact."""
    files = {str(Path(a).relative_to(out)): sha256(a) for a in sorted(artifacts)}
    return write_json(out / "manifest.json", {"command": command, "seed": config["seed"], "config": config, "artifacts": files})


class RunLock:
    """Exclusive per-directory lock: a second run into the same directory fails."""

    def __init__(self, directory: Path):
        self.path = Path(directory) / ".spinsim.lock"
        self._fd = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            self._fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(f"output directory {self.path.parent} is locked by another run ({self.path})") from None
        os.write(self._fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc):
        os.close(self._fd)
        self.path.unlink(missing_ok=True)
        return False
