"""Hardware-in-the-loop UNet with crossbar weights and behavioral activations.

Every convolution, transposed convolution and the 1x1 head is a crossbar: a
bias row with unit input is appended to the lowered patch matrix. ReLU and
fused ReLU-max-pool stages add Gaussian output noise at the circuit error
rate. Gradients are computed host-side through the ideal functional forms;
each weight update is written back as one domain-wall pulse per synapse and
its Joule energy metered.

Activations are channels-last: (N, H, W, C).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .crossbar import DEFAULT_PAIR, CrossbarArray, col2im, encode_weights, im2col, mvm, zero_insert
from .synapse import MAX_WRITE_CURRENT, DwTrackParams
from .transport import ConductancePair

# error rates (% of full scale) of the activation circuits per magnet variant
VARIANT_ERRORS = {4.58: (2.68, 2.18), 30.26: (0.66, 0.48), 45.81: (0.40, 0.42)}
RELU_POWER = 0.343e-6  # W at delta = 4.58
MAXPOOL_POWER = 17.86e-6  # W per 3x3 window at delta = 4.58
RELU_SETTLE = 4e-9
MAXPOOL_SETTLE = 12e-9
REFERENCE_HK_OE = 330.0
VARIANT_HK_OE = {4.58: 330.0, 30.26: 2180.0, 45.81: 3300.0}


# --------------------------------------------------------------------------- #
# configuration and profiles


@dataclass(frozen=True)
class UnetConfig:
    input_size: int = 32
    in_channels: int = 3
    n_classes: int = 3
    depth: int = 2
    base: int = 8
    kernel: int = 3
    pool: int = 3  # 3: 3x3 stride-2 window, 2: 2x2 stride-2 window
    convs_per_stage: int = 2
    deconv_relu: bool = True
    delta: float = 4.58
    w_max: float = 1.0

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.input_size % (2**self.depth):
            raise ValueError(f"input size {self.input_size} not divisible by 2^{self.depth}")
        if self.kernel % 2 == 0 or self.kernel < 1:
            raise ValueError("kernel size must be odd")
        if self.pool not in (2, 3):
            raise ValueError("pool window must be 2 or 3")
        if min(self.in_channels, self.n_classes, self.base, self.convs_per_stage) < 1:
            raise ValueError("channel counts must be positive")
        if self.delta not in VARIANT_ERRORS:
            raise ValueError(f"unknown thermal-stability variant {self.delta}")

    @classmethod
    def reference_scale(cls) -> "UnetConfig":
        """Count model of the full network: 512 px, 32 classes, five pool stages."""
        return cls(input_size=512, in_channels=3, n_classes=32, depth=5, base=16, convs_per_stage=1)


@dataclass(frozen=True)
class HardwareProfile:
    relu_err_pct: float = 2.68
    maxpool_err_pct: float = 2.18
    relu_energy: float = RELU_POWER * RELU_SETTLE  # J per ReLU evaluation
    maxpool_energy: float = MAXPOOL_POWER * MAXPOOL_SETTLE  # J per window evaluation
    relu_settle: float = RELU_SETTLE
    maxpool_settle: float = MAXPOOL_SETTLE
    track: DwTrackParams = field(default_factory=DwTrackParams)
    pair: ConductancePair = DEFAULT_PAIR

    def __post_init__(self):
        vals = (self.relu_err_pct, self.maxpool_err_pct, self.relu_energy, self.maxpool_energy,
                self.relu_settle, self.maxpool_settle)
        if min(vals) < 0:
            raise ValueError("profile entries must be non-negative")

    @classmethod
    def for_delta(cls, delta: float, **kw) -> "HardwareProfile":
        """Tabulated error rates; activation energies follow the H_k current scaling."""
        try:
            relu_err, pool_err = VARIANT_ERRORS[delta]
        except KeyError:
            raise ValueError(f"unknown thermal-stability variant {delta}") from None
        s = VARIANT_HK_OE[delta] / REFERENCE_HK_OE
        base = dict(
            relu_err_pct=relu_err,
            maxpool_err_pct=pool_err,
            relu_energy=RELU_POWER * RELU_SETTLE * s,
            maxpool_energy=MAXPOOL_POWER * MAXPOOL_SETTLE * s,
        )
        base.update(kw)
        return cls(**base)

    @classmethod
    def ideal(cls) -> "HardwareProfile":
        return cls(relu_err_pct=0.0, maxpool_err_pct=0.0)


@dataclass
class EnergyLedger:
    synapse_write: float = 0.0
    relu: float = 0.0
    maxpool: float = 0.0
    images: int = 0
    forward_time: float = 0.0  # critical path of the last forward pass, s
    per_epoch: list = field(default_factory=list)  # per-epoch write energies, J

    @property
    def total(self) -> float:
        return self.synapse_write + self.relu + self.maxpool

    @property
    def per_image_inference(self) -> float:
        return (self.relu + self.maxpool) / self.images if self.images else 0.0

    def add(self, other: "EnergyLedger") -> "EnergyLedger":
        for name in ("synapse_write", "relu", "maxpool", "images"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.forward_time = max(self.forward_time, other.forward_time)
        self.per_epoch = list(self.per_epoch) + list(other.per_epoch)
        return self

    def __add__(self, other: "EnergyLedger") -> "EnergyLedger":
        return EnergyLedger().add(self).add(other)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        d["per_image_inference"] = self.per_image_inference
        return d


# --------------------------------------------------------------------------- #
# behavioral activation layers


def _noise(y, err_pct: float, rng) -> np.ndarray:
    if err_pct <= 0:
        return y
    if rng is None:
        raise ValueError("noisy activations need a random generator")
    eta = (err_pct / 100.0) * rng.standard_normal(y.shape)
    return np.where(y > 0, y + eta, y)


def behavioral_relu(x, err_pct: float = 0.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """max(0, x) plus circuit noise on the outputs that are switched on."""
    return _noise(np.maximum(np.asarray(x, dtype=float), 0.0), err_pct, rng)


def _pool_windows(x: np.ndarray, window: int) -> tuple[np.ndarray, int]:
    pad = 1 if window == 3 else 0
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)), constant_values=-np.inf)
    w = np.lib.stride_tricks.sliding_window_view(x, (window, window), axis=(1, 2))[:, ::2, ::2]
    return w, pad


def behavioral_maxpool(x, window: int = 3, err_pct: float = 0.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """Fused ReLU and stride-2 max pooling (3x3 padded or 2x2), plus circuit noise."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 3
    xb = x[None] if single else x
    w, _ = _pool_windows(xb, window)
    n, ho, wo, c = w.shape[:4]
    y = np.maximum(w.reshape(n, ho, wo, c, -1).max(axis=-1), 0.0)
    y = _noise(y, err_pct, rng)
    return y[0] if single else y


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# --------------------------------------------------------------------------- #
# network


@dataclass
class Layer:
    name: str
    kind: str  # conv, deconv, head
    k: int
    c_in: int
    c_out: int
    xbar: CrossbarArray
    relu: bool = True

    @property
    def weights(self) -> np.ndarray:
        """Decoded (k*k*c_in + 1, c_out) weights; last row is the bias."""
        return (self.xbar.g - self.xbar.g_par) / self.xbar.g_unit

    @property
    def synapses(self) -> int:
        return self.xbar.g.size


@dataclass
class Unet:
    cfg: UnetConfig
    layers: dict[str, Layer]
    counts: dict[str, int]

    @property
    def param_shapes(self) -> dict[str, tuple[int, int]]:
        return {n: lay.xbar.g.shape for n, lay in self.layers.items()}

    def weights(self) -> dict[str, np.ndarray]:
        return {n: lay.weights for n, lay in self.layers.items()}


def _topology(cfg: UnetConfig):
    """(name, kind, k, c_in, c_out, relu, spatial size) in forward order."""
    k, s, c_prev = cfg.kernel, cfg.input_size, cfg.in_channels
    spec, chans = [], []
    for lvl in range(cfg.depth):
        c = cfg.base * 2**lvl
        for j in range(cfg.convs_per_stage):
            spec.append((f"enc{lvl}_conv{j}", "conv", k, c_prev, c, True, s))
            c_prev = c
        chans.append(c)
        s //= 2
    c = cfg.base * 2**cfg.depth
    for j in range(cfg.convs_per_stage):
        spec.append((f"bottleneck_conv{j}", "conv", k, c_prev, c, True, s))
        c_prev = c
    for lvl in reversed(range(cfg.depth)):
        c = chans[lvl]
        s *= 2
        spec.append((f"dec{lvl}_up", "deconv", k, c_prev, c, cfg.deconv_relu, s))
        c_prev = 2 * c
        for j in range(cfg.convs_per_stage):
            spec.append((f"dec{lvl}_conv{j}", "conv", k, c_prev, c, True, s))
            c_prev = c
    spec.append(("head", "head", 1, c_prev, cfg.n_classes, False, s))
    return spec


def instance_counts(cfg: UnetConfig) -> dict[str, int]:
    """Synapses (weights plus bias rows), ReLU outputs and max-pool windows per image."""
    syn = relu = 0
    for _, _, k, c_in, c_out, has_relu, s in _topology(cfg):
        syn += (k * k * c_in + 1) * c_out
        relu += s * s * c_out if has_relu else 0
    pool = sum((cfg.input_size // 2 ** (lvl + 1)) ** 2 * cfg.base * 2**lvl for lvl in range(cfg.depth))
    return {"synapses": syn, "relu": relu, "maxpool": pool}


def critical_path(cfg: UnetConfig, profile: HardwareProfile) -> float:
    """Sum of settle times of the sequential activation stages (skips run in parallel)."""
    n_relu = sum(1 for t in _topology(cfg) if t[5])
    return n_relu * profile.relu_settle + cfg.depth * profile.maxpool_settle


def build_unet(cfg: UnetConfig, rng: np.random.Generator | None = None, pair: ConductancePair = DEFAULT_PAIR) -> Unet:
    """He-initialized UNet with every weight tensor programmed onto a crossbar."""
    rng = rng or np.random.default_rng(0)
    layers = {}
    for name, kind, k, c_in, c_out, has_relu, _ in _topology(cfg):
        fan_in = k * k * c_in
        w = rng.standard_normal((fan_in, c_out)) * math.sqrt(2.0 / fan_in)
        w = np.vstack([w, np.zeros((1, c_out))])
        layers[name] = Layer(name, kind, k, c_in, c_out, encode_weights(w, pair, cfg.w_max), has_relu)
    return Unet(cfg, layers, instance_counts(cfg))


def _affine(cols: np.ndarray, lay: Layer) -> np.ndarray:
    """Crossbar evaluation of [cols, 1] @ W, rescaled to weight units."""
    ones = np.ones(cols.shape[:-1] + (1,))
    v = np.concatenate([cols, ones], axis=-1)
    scale = float(np.max(np.abs(v)))
    scale = scale if scale > 0 else 1.0
    volts = v * (lay.xbar.v_read / scale)
    return mvm(lay.xbar, volts) * (scale / (lay.xbar.v_read * lay.xbar.g_unit))


def _layer_forward(lay: Layer, x: np.ndarray, cache: dict) -> np.ndarray:
    if lay.kind == "deconv":
        z = zero_insert(x, 2)
        cols = im2col(z, lay.k, 1, (lay.k - 1) // 2)
        cache[lay.name] = ("deconv", cols, z.shape, x.shape)
        return _affine(cols, lay)[:, 1:, 1:, :]
    pad = (lay.k - 1) // 2
    cols = im2col(x, lay.k, 1, pad)
    cache[lay.name] = ("conv", cols, x.shape, None)
    return _affine(cols, lay)


def _maxpool_forward(x: np.ndarray, window: int, err: float, rng, cache: dict, key: str):
    w, pad = _pool_windows(x, window)
    n, ho, wo, c = w.shape[:4]
    flat = w.reshape(n, ho, wo, c, -1)
    idx = flat.argmax(axis=-1)
    m = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    y = np.maximum(m, 0.0)
    cache[key] = (x.shape, idx, m > 0, window, pad)
    return _noise(y, err, rng)


def forward(
    model: Unet,
    images: np.ndarray,
    profile: HardwareProfile | None = None,
    rng: np.random.Generator | None = None,
    cache: dict | None = None,
) -> tuple[np.ndarray, EnergyLedger]:
    """Class probabilities (N, H, W, classes) and the activation energy of the pass."""
    cfg = model.cfg
    profile = profile or HardwareProfile.for_delta(cfg.delta)
    x = np.asarray(images, dtype=float)
    single = x.ndim == 3
    if single:
        x = x[None]
    expect = (cfg.input_size, cfg.input_size, cfg.in_channels)
    if x.shape[1:] != expect:
        raise ValueError(f"image shape {x.shape[1:]} does not match config {expect}")
    cache = {} if cache is None else cache
    skips = []
    r_err, p_err = profile.relu_err_pct, profile.maxpool_err_pct

    def act(lay, h):
        h = _layer_forward(lay, h, cache)
        if lay.relu:
            cache[lay.name + "/relu"] = h > 0
            h = _noise(np.maximum(h, 0.0), r_err, rng)
        return h

    for lvl in range(cfg.depth):
        for j in range(cfg.convs_per_stage):
            x = act(model.layers[f"enc{lvl}_conv{j}"], x)
        skips.append(x)
        x = _maxpool_forward(x, cfg.pool, p_err, rng, cache, f"pool{lvl}")
    for j in range(cfg.convs_per_stage):
        x = act(model.layers[f"bottleneck_conv{j}"], x)
    for lvl in reversed(range(cfg.depth)):
        x = act(model.layers[f"dec{lvl}_up"], x)
        x = np.concatenate([x, skips[lvl]], axis=-1)
        for j in range(cfg.convs_per_stage):
            x = act(model.layers[f"dec{lvl}_conv{j}"], x)
    logits = _layer_forward(model.layers["head"], x, cache)
    probs = softmax(logits)

    n = x.shape[0]
    led = EnergyLedger(
        relu=n * model.counts["relu"] * profile.relu_energy,
        maxpool=n * model.counts["maxpool"] * profile.maxpool_energy,
        images=n,
        forward_time=critical_path(cfg, profile),
    )
    return (probs[0] if single else probs), led


def _layer_backward(lay: Layer, g: np.ndarray, cache: dict) -> tuple[np.ndarray, np.ndarray]:
    kind, cols, in_shape, x_shape = cache[lay.name]
    if kind == "deconv":
        g = np.pad(g, ((0, 0), (1, 0), (1, 0), (0, 0)))
    w = lay.weights
    flat_cols = cols.reshape(-1, cols.shape[-1])
    flat_g = g.reshape(-1, g.shape[-1])
    grad_w = np.vstack([flat_cols.T @ flat_g, flat_g.sum(axis=0, keepdims=True)])
    g_cols = (flat_g @ w[:-1].T).reshape(cols.shape)
    g_in = col2im(g_cols, in_shape, lay.k, 1, (lay.k - 1) // 2)
    if kind == "deconv":
        h, wd = x_shape[1], x_shape[2]
        g_in = g_in[:, 1 : 2 * h : 2, 1 : 2 * wd : 2]
    return g_in, grad_w


def _maxpool_backward(g: np.ndarray, cache_entry) -> np.ndarray:
    x_shape, idx, on, window, pad = cache_entry
    n, h, w, c = x_shape
    g = g * on
    out = np.zeros((n, h + 2 * pad, w + 2 * pad, c))
    ho, wo = idx.shape[1], idx.shape[2]
    du, dv = np.divmod(idx, window)
    ii = 2 * np.arange(ho)[None, :, None, None] + du
    jj = 2 * np.arange(wo)[None, None, :, None] + dv
    nn = np.arange(n)[:, None, None, None]
    cc = np.arange(c)[None, None, None, :]
    np.add.at(out, (np.broadcast_to(nn, idx.shape), ii, jj, np.broadcast_to(cc, idx.shape)), g)
    return out[:, pad : pad + h, pad : pad + w] if pad else out


def backward(model: Unet, probs: np.ndarray, labels: np.ndarray, cache: dict) -> tuple[float, dict[str, np.ndarray]]:
    """Mean pixel cross-entropy and its gradient for every layer's weight matrix."""
    cfg = model.cfg
    n, h, w, k = probs.shape
    lab = np.asarray(labels, dtype=np.int64)
    p_true = np.take_along_axis(probs, lab[..., None], axis=-1)[..., 0]
    loss = float(-np.mean(np.log(np.maximum(p_true, 1e-300))))
    g = probs.copy()
    np.put_along_axis(g, lab[..., None], np.take_along_axis(g, lab[..., None], axis=-1) - 1.0, axis=-1)
    g /= n * h * w
    grads = {}

    def back(name, g):
        lay = model.layers[name]
        if lay.relu:
            g = g * cache[name + "/relu"]
        g, grads[name] = _layer_backward(lay, g, cache)
        return g

    g, grads["head"] = _layer_backward(model.layers["head"], g, cache)
    skip_grads = [None] * cfg.depth
    # the decoder runs from the deepest level down, so unwind from level 0 upward
    for lvl in range(cfg.depth):
        for j in reversed(range(cfg.convs_per_stage)):
            g = back(f"dec{lvl}_conv{j}", g)
        c_up = model.layers[f"dec{lvl}_up"].c_out
        g, skip_grads[lvl] = g[..., :c_up], g[..., c_up:]
        g = back(f"dec{lvl}_up", g)
    for j in reversed(range(cfg.convs_per_stage)):
        g = back(f"bottleneck_conv{j}", g)
    for lvl in reversed(range(cfg.depth)):
        g = _maxpool_backward(g, cache[f"pool{lvl}"]) + skip_grads[lvl]
        for j in reversed(range(cfg.convs_per_stage)):
            g = back(f"enc{lvl}_conv{j}", g)
    return loss, grads


# --------------------------------------------------------------------------- #
# training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    lr: float = 0.05
    lr_decay: float = 0.85  # per-epoch multiplicative decay
    momentum: float = 0.9
    batch: int = 4

    def __post_init__(self):
        if self.epochs < 1 or self.batch < 1:
            raise ValueError("epochs and batch must be positive")
        if self.lr < 0 or not 0 <= self.momentum < 1 or self.lr_decay <= 0:
            raise ValueError("invalid optimizer settings")


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    pixel_accuracy: float
    write_energy: float
    clipped: int


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, history: list[EpochMetrics]):
        super().__init__(message)
        self.history = history


def write_update(lay: Layer, delta_w: np.ndarray, track: DwTrackParams) -> tuple[float, int]:
    """Program ``delta_w`` onto the layer's synapses; returns (energy J, clipped count).

    One fixed-duration pulse per touched synapse, amplitude proportional to the
    conductance change and limited by the write-current bound and the track ends.
    """
    xb = lay.xbar
    span = xb.pair.g_p - xb.pair.g_ap
    per_amp = span / track.length * track.mobility * track.current_density_per_amp * track.pulse_duration
    target = xb.g + delta_w * xb.g_unit
    reach = np.clip(target, xb.pair.g_ap, xb.pair.g_p) - xb.g
    amp = reach / per_amp
    over = np.abs(amp) > MAX_WRITE_CURRENT
    amp = np.clip(amp, -MAX_WRITE_CURRENT, MAX_WRITE_CURRENT)
    xb.g = xb.g + amp * per_amp
    clipped = int(np.count_nonzero(over | (np.abs(reach - delta_w * xb.g_unit) > 1e-15 * span)))
    xb.n_clipped += clipped
    return float(np.sum(amp**2) * track.write_resistance * track.pulse_duration), clipped


def pixel_accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(np.argmax(probs, axis=-1) == labels))


def train(
    model: Unet,
    images: np.ndarray,
    labels: np.ndarray,
    tcfg: TrainConfig,
    profile: HardwareProfile | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[list[EpochMetrics], EnergyLedger]:
    """SGD with momentum through noisy hardware forward passes."""
    profile = profile or HardwareProfile.for_delta(model.cfg.delta)
    rng = rng or np.random.default_rng(0)
    velocity = {n: np.zeros(s) for n, s in model.param_shapes.items()}
    ledger = EnergyLedger()
    history: list[EpochMetrics] = []
    n = len(images)
    for epoch in range(tcfg.epochs):
        lr = tcfg.lr * tcfg.lr_decay**epoch
        order = rng.permutation(n)
        e_write, clipped, losses, correct = 0.0, 0, [], 0
        for start in range(0, n, tcfg.batch):
            sel = order[start : start + tcfg.batch]
            cache = {}
            probs, led = forward(model, images[sel], profile, rng, cache)
            loss, grads = backward(model, probs, labels[sel], cache)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}", history)
            losses.append(loss * len(sel))
            correct += int(np.sum(np.argmax(probs, axis=-1) == labels[sel]))
            ledger.add(led)
            if lr == 0:
                continue
            for name, lay in model.layers.items():
                velocity[name] = tcfg.momentum * velocity[name] + grads[name]
                e, c = write_update(lay, -lr * velocity[name], profile.track)
                e_write += e
                clipped += c
        ledger.synapse_write += e_write
        ledger.per_epoch.append(e_write)
        history.append(EpochMetrics(epoch, float(np.sum(losses) / n), correct / labels[:n].size, e_write, clipped))
    return history, ledger


def evaluate(
    model: Unet,
    images: np.ndarray,
    labels: np.ndarray,
    profile: HardwareProfile | None = None,
    rng: np.random.Generator | None = None,
    batch: int = 16,
) -> tuple[float, np.ndarray, EnergyLedger]:
    """Pixel accuracy, predicted label maps and the inference ledger."""
    preds, ledger = [], EnergyLedger()
    for start in range(0, len(images), batch):
        probs, led = forward(model, images[start : start + batch], profile, rng)
        preds.append(np.argmax(probs, axis=-1))
        ledger.add(led)
    pred = np.concatenate(preds) if preds else np.zeros((0,) + labels.shape[1:], dtype=np.int64)
    return float(np.mean(pred == labels)) if len(pred) else 0.0, pred, ledger


def smoothed(values, width: int = 3) -> np.ndarray:
    """Trailing moving average (shorter window at the start)."""
    v = np.asarray(values, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, len(v) + 1)
    lo = np.maximum(idx - width, 0)
    return (c[idx] - c[lo]) / (idx - lo)


# --------------------------------------------------------------------------- #
# energy reporting


@dataclass(frozen=True)
class Schedule:
    epochs: int
    images_per_epoch: int
    per_image_energy: float  # J

    def __post_init__(self):
        if self.epochs < 0 or self.images_per_epoch < 0 or self.per_image_energy < 0:
            raise ValueError("schedule entries must be non-negative")


REFERENCE_SCHEDULE = Schedule(150, 369, 1.55e-6)
VARIANT_TOTALS_MJ = {4.58: 85.79, 30.26: 462.72, 45.81: 821.39}


def energy_report(ledger: EnergyLedger, profile: HardwareProfile, schedule: Schedule, cfg: UnetConfig | None = None) -> dict:
    """Top-down schedule arithmetic next to the bottom-up ledger totals."""
    top_down = schedule.epochs * schedule.images_per_epoch * schedule.per_image_energy
    report = {
        "top_down_total_J": top_down,
        "top_down_total_mJ": top_down * 1e3,
        "bottom_up": ledger.to_dict(),
        "variant_ratio_45.81_over_4.58": VARIANT_TOTALS_MJ[45.81] / VARIANT_TOTALS_MJ[4.58],
    }
    if cfg is not None:
        counts = instance_counts(cfg)
        per_image = counts["relu"] * profile.relu_energy + counts["maxpool"] * profile.maxpool_energy
        report["counts"] = counts
        report["count_model_per_image_J"] = per_image
        report["count_model_vs_schedule"] = per_image / schedule.per_image_energy if schedule.per_image_energy else math.nan
        report["critical_path_s"] = critical_path(cfg, profile)
    if ledger.images:
        report["ledger_per_image_J"] = ledger.per_image_inference
        report["ledger_vs_schedule"] = (
            ledger.per_image_inference / schedule.per_image_energy if schedule.per_image_energy else math.nan
        )
    return report
