"""Segmentation datasets: synthetic shapes and a CamVid-style directory loader."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..crossbar import load_tensor, save_tensor

SPLIT_RATIO = (369, 100, 232)  # train / val / test
SPLITS = ("train", "val", "test")
SHAPE_KINDS = ("circle", "rectangle", "triangle", "ring", "cross")
# size factors that give every kind the area of a circle of the same nominal radius
AREA_FACTOR = {
    "circle": 1.0,
    "rectangle": (np.pi / 4) ** 0.5,
    "triangle": (np.pi / (0.75 * 3**0.5)) ** 0.5,
    "ring": (1 / (1 - 0.55**2)) ** 0.5,
    "cross": (np.pi / (4 * 2 * 0.35 - 4 * 0.35**2)) ** 0.5,
}
IMAGE_EXTS = (".png", ".bmp", ".jpg", ".jpeg", ".tif", ".tiff")


@dataclass
class SegDataset:
    images: np.ndarray  # (N, H, W, C) float in [0, 1]
    labels: np.ndarray  # (N, H, W) int64 class indices
    n_classes: int
    splits: np.ndarray  # (N,) split tags
    names: tuple[str, ...] = ()

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.splits = np.asarray(self.splits, dtype="<U5")
        if self.images.ndim != 4 or self.images.shape[:3] != self.labels.shape:
            raise ValueError(f"image shape {self.images.shape} and label shape {self.labels.shape} disagree")
        if len(self.splits) != len(self.images):
            raise ValueError("one split tag per image required")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        bad = set(self.splits.tolist()) - set(SPLITS)
        if bad:
            raise ValueError(f"unknown split tags {sorted(bad)}")
        if not self.names:
            self.names = tuple(f"{i:05d}" for i in range(len(self.images)))

    def __len__(self) -> int:
        return len(self.images)

    def subset(self, split: str) -> "SegDataset":
        sel = self.splits == split
        names = tuple(n for n, s in zip(self.names, sel) if s)
        return SegDataset(self.images[sel], self.labels[sel], self.n_classes, self.splits[sel], names)

    def class_histogram(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.n_classes) / max(self.labels.size, 1)


# --------------------------------------------------------------------------- #
# synthetic shapes


def _inside(kind: str, x: np.ndarray, y: np.ndarray, cx, cy, r, angle, aspect) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    u = c * (x - cx) + s * (y - cy)
    v = -s * (x - cx) + c * (y - cy)
    if kind == "circle":
        return u * u + v * v <= r * r
    if kind == "rectangle":
        return (np.abs(u) <= r * aspect) & (np.abs(v) <= r / aspect)
    if kind == "triangle":
        inside = np.ones_like(u, dtype=bool)
        for k in range(3):
            a = 2 * np.pi * k / 3 + np.pi / 2
            inside &= u * np.cos(a) + v * np.sin(a) <= 0.5 * r
        return inside
    if kind == "ring":
        d2 = u * u + v * v
        return (d2 <= r * r) & (d2 >= (0.55 * r) ** 2)
    if kind == "cross":
        w = 0.35 * r
        return ((np.abs(u) <= r) & (np.abs(v) <= w)) | ((np.abs(v) <= r) & (np.abs(u) <= w))
    raise ValueError(f"unknown shape {kind}")


def _texture(gen: np.random.Generator, size: int) -> np.ndarray:
    """Smooth low-frequency background plus fine grain, (size, size, 3)."""
    coarse = gen.uniform(0.15, 0.45, (4, 4, 3))
    idx = np.linspace(0, 3, size)
    i0 = np.minimum(idx.astype(int), 2)
    f = idx - i0
    rows = coarse[i0] * (1 - f)[:, None, None] + coarse[i0 + 1] * f[:, None, None]
    smooth = rows[:, i0] * (1 - f)[None, :, None] + rows[:, i0 + 1] * f[None, :, None]
    return np.clip(smooth + gen.normal(0, 0.03, (size, size, 3)), 0, 1)


def _class_colors(classes: int) -> np.ndarray:
    hues = np.linspace(0, 1, classes - 1, endpoint=False)
    # simple hue wheel at fixed saturation / value
    k = (np.arange(3)[None, :] * 1 / 3 + hues[:, None]) * 2 * np.pi
    return 0.55 + 0.35 * np.cos(k)


def generate_shapes(n: int, size: int = 32, classes: int = 3, seed: int = 0, supersample: int = 4) -> SegDataset:
    """Anti-aliased shapes on a textured background; every foreground class once per image.

    Class c >= 1 is drawn as SHAPE_KINDS[c - 1] with its own base colour (jittered).
    Labels take the class of the topmost shape covering at least half the pixel.
    """
    if not 2 <= classes <= 6:
        raise ValueError("classes must be in 2..6")
    if size < 16:
        raise ValueError("size must be at least 16")
    if n < 0:
        raise ValueError("n must be non-negative")
    gen = np.random.default_rng(seed)
    colors = _class_colors(classes)
    ss = supersample
    sub = (np.arange(size * ss) + 0.5) / ss
    xs, ys = np.meshgrid(sub, sub)
    images = np.empty((n, size, size, 3))
    labels = np.zeros((n, size, size), dtype=np.int64)
    for i in range(n):
        img = _texture(gen, size)
        lab = labels[i]
        for cls in gen.permutation(np.arange(1, classes)):
            kind = SHAPE_KINDS[cls - 1]
            r = size * gen.uniform(0.14, 0.24) * AREA_FACTOR[kind]
            cx, cy = gen.uniform(r, size - r, 2)
            mask = _inside(kind, xs, ys, cx, cy, r, gen.uniform(0, np.pi), gen.uniform(0.7, 1.4))
            cover = mask.reshape(size, ss, size, ss).mean(axis=(1, 3))
            color = np.clip(colors[cls - 1] + gen.normal(0, 0.05, 3), 0, 1)
            img = img * (1 - cover[..., None]) + color * cover[..., None]
            lab[cover >= 0.5] = cls
        images[i] = img
    return SegDataset(images, labels, classes, split_tags(n))


# --------------------------------------------------------------------------- #
# splits and directory IO


def split_counts(n: int) -> tuple[int, int, int]:
    """369/100/232 for the full set, largest-remainder proportional split otherwise."""
    total = sum(SPLIT_RATIO)
    if n == total:
        return SPLIT_RATIO
    exact = np.array(SPLIT_RATIO, dtype=float) * n / total
    counts = np.floor(exact).astype(int)
    for k in np.argsort(-(exact - counts), kind="stable")[: n - counts.sum()]:
        counts[k] += 1
    return tuple(int(c) for c in counts)


def split_tags(n: int) -> np.ndarray:
    return np.repeat(np.array(SPLITS), split_counts(n))


def _parse_color(key: str) -> tuple[int, int, int]:
    s = key.strip()
    if s.startswith("#") and len(s) == 7:
        return tuple(int(s[k : k + 2], 16) for k in (1, 3, 5))
    parts = [int(p) for p in s.replace(" ", "").split(",")]
    if len(parts) != 3:
        raise ValueError(f"cannot parse colour {key!r}")
    return tuple(parts)


def load_camvid_layout(directory: str | Path) -> SegDataset:
    """Load ``images/*`` with same-stem label images in ``labels/``.

    ``classes.json`` maps label colours (``"#rrggbb"`` or ``"r,g,b"``) to class
    indices. Palette-indexed label images are converted through their palette.
    """
    root = Path(directory)
    img_dir, lab_dir = root / "images", root / "labels"
    files = sorted(p for p in img_dir.glob("*") if p.suffix.lower() in IMAGE_EXTS) if img_dir.is_dir() else []
    if not files:
        raise ValueError(f"empty dataset: no images under {img_dir}")
    mapping_file = root / "classes.json"
    if not mapping_file.exists():
        raise ValueError(f"missing colour mapping {mapping_file}")
    mapping = {_parse_color(k): int(v) for k, v in json.loads(mapping_file.read_text()).items()}
    n_classes = max(mapping.values()) + 1
    lut = {(r << 16) | (g << 8) | b: c for (r, g, b), c in mapping.items()}
    keys = np.array(sorted(lut))
    vals = np.array([lut[k] for k in keys])

    images, labels = [], []
    for f in files:
        cands = [p for p in lab_dir.glob(f.stem + ".*") if p.suffix.lower() in IMAGE_EXTS]
        if not cands:
            raise ValueError(f"missing label image for {f.name}")
        img = np.asarray(Image.open(f).convert("RGB"), dtype=float) / 255.0
        rgb = np.asarray(Image.open(cands[0]).convert("RGB"), dtype=np.int64)
        code = (rgb[..., 0] << 16) | (rgb[..., 1] << 8) | rgb[..., 2]
        pos = np.clip(np.searchsorted(keys, code), 0, len(keys) - 1)
        unknown = keys[pos] != code
        if np.any(unknown):
            bad = sorted({f"#{c:06x}" for c in np.unique(code[unknown])})
            raise ValueError(f"unknown label colours in {cands[0].name}: {', '.join(bad)}")
        if img.shape[:2] != code.shape:
            raise ValueError(f"image and label sizes differ for {f.name}")
        images.append(img)
        labels.append(vals[pos])
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise ValueError("all images must share one size")
    return SegDataset(np.stack(images), np.stack(labels), n_classes, split_tags(len(files)), tuple(f.stem for f in files))


def save_dataset(ds: SegDataset, directory: str | Path) -> None:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    save_tensor(root / "images.bin", ds.images)
    save_tensor(root / "labels.bin", ds.labels)
    meta = {"n_classes": ds.n_classes, "splits": ds.splits.tolist(), "names": list(ds.names)}
    (root / "dataset.json").write_text(json.dumps(meta, indent=1))


def load_dataset(directory: str | Path) -> SegDataset:
    root = Path(directory)
    meta = json.loads((root / "dataset.json").read_text())
    return SegDataset(
        load_tensor(root / "images.bin"), load_tensor(root / "labels.bin"), meta["n_classes"], np.array(meta["splits"]),
        tuple(meta["names"]),
    )
