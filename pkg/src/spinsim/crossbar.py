"""Crossbar realization of convolution and transposed convolution.

Weights live as domain-wall synapse conductances around the mid-point
G_par = (G_P + G_AP)/2; a column current minus G_par times the row voltages
is the signed dot product. Convolutions are lowered to one matrix-vector
primitive by im2col, and transposed convolutions by edge-inclusive zero
insertion followed by an ordinary convolution.

Tensors are channels-last: (H, W, C) or batched (N, H, W, C); kernels are
(k, k, C_in, C_out).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .synapse import DwSynapse
from .transport import ConductancePair

DEFAULT_PAIR = ConductancePair(1.4416e-4, 1.0e-4)
DEFAULT_V_READ = 0.1  # V applied for a unit input


@dataclass(frozen=True)
class DeviceNoise:
    """Multiplicative Gaussian conductance errors, off by default."""

    program_sigma: float = 0.0
    read_sigma: float = 0.0

    def __post_init__(self):
        if self.program_sigma < 0 or self.read_sigma < 0:
            raise ValueError("noise levels must be non-negative")


@dataclass
class CrossbarArray:
    g: np.ndarray  # (rows, cols) programmed conductances, S
    pair: ConductancePair
    w_max: float = 1.0  # weight mapped to G_P
    v_read: float = DEFAULT_V_READ
    n_clipped: int = 0
    noise: DeviceNoise = field(default_factory=DeviceNoise)
    track_length: float = 500e-9

    @property
    def rows(self) -> int:
        return self.g.shape[0]

    @property
    def cols(self) -> int:
        return self.g.shape[1]

    @property
    def g_par(self) -> float:
        return self.pair.g_parallel

    @property
    def g_unit(self) -> float:
        """Conductance change per unit weight."""
        return 0.5 * (self.pair.g_p - self.pair.g_ap) / self.w_max

    def synapse(self, i: int, j: int) -> DwSynapse:
        frac = (self.g[i, j] - self.pair.g_ap) / (self.pair.g_p - self.pair.g_ap)
        frac = min(max(frac, 0.0), 1.0)
        return DwSynapse(frac * self.track_length, self.pair, self.track_length)

    def wall_positions(self) -> np.ndarray:
        frac = (self.g - self.pair.g_ap) / (self.pair.g_p - self.pair.g_ap)
        return np.clip(frac, 0.0, 1.0) * self.track_length


def encode_weights(
    w,
    pair: ConductancePair = DEFAULT_PAIR,
    w_max: float = 1.0,
    v_read: float = DEFAULT_V_READ,
    noise: DeviceNoise | None = None,
    rng: np.random.Generator | None = None,
) -> CrossbarArray:
    """Program ``w`` (rows x cols) as G = G_par + w * g_unit, clipping to [-w_max, w_max]."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise ValueError("weights must be a 2-D array")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    noise = noise or DeviceNoise()
    clipped = np.clip(w, -w_max, w_max)
    xb = CrossbarArray(np.empty_like(w), pair, w_max, v_read, int(np.sum(clipped != w)), noise)
    g = xb.g_par + clipped * xb.g_unit
    if noise.program_sigma > 0:
        if rng is None:
            raise ValueError("programming noise needs a random generator")
        g = g * (1.0 + noise.program_sigma * rng.standard_normal(g.shape))
    xb.g = g
    return xb


def decode_weights(xb: CrossbarArray) -> np.ndarray:
    return (xb.g - xb.g_par) / xb.g_unit


def mvm(xb: CrossbarArray, v_in, rng: np.random.Generator | None = None) -> np.ndarray:
    """Differential column currents I_j = sum_i v_i (G_ij - G_par).

    ``v_in`` may be (rows,) or a batch (..., rows).
    """
    v = np.asarray(v_in, dtype=float)
    if v.shape[-1] != xb.rows:
        raise ValueError(f"input length {v.shape[-1]} does not match {xb.rows} rows")
    g = xb.g
    if xb.noise.read_sigma > 0:
        if rng is None:
            raise ValueError("read noise needs a random generator")
        g = g * (1.0 + xb.noise.read_sigma * rng.standard_normal(g.shape))
    return v @ (g - xb.g_par)


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ValueError(f"expected (H, W, C) or (N, H, W, C), got shape {x.shape}")


def im2col(x: np.ndarray, k: int, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Patches of a batch (N, H, W, C) as (N, H_out, W_out, k*k*C), row order (u, v, c)."""
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
    win = win[:, ::stride, ::stride]  # (N, Ho, Wo, C, k, k)
    n, ho, wo, c = win.shape[:4]
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(n, ho, wo, k * k * c)


def col2im(cols: np.ndarray, shape: tuple[int, int, int, int], k: int, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Adjoint of im2col: scatter-add patch gradients back onto (N, H, W, C)."""
    n, h, w, c = shape
    out = np.zeros((n, h + 2 * padding, w + 2 * padding, c))
    ho, wo = cols.shape[1], cols.shape[2]
    cols = cols.reshape(n, ho, wo, k, k, c)
    for u in range(k):
        for v in range(k):
            out[:, u : u + stride * ho : stride, v : v + stride * wo : stride] += cols[:, :, :, u, v]
    if padding:
        out = out[:, padding:-padding, padding:-padding]
    return out


def _check_kernel(kernels: np.ndarray, c_in: int) -> int:
    if kernels.ndim != 4 or kernels.shape[0] != kernels.shape[1]:
        raise ValueError("kernels must be (k, k, C_in, C_out)")
    k = kernels.shape[0]
    if k % 2 == 0:
        raise ValueError("kernel size must be odd")
    if kernels.shape[2] != c_in:
        raise ValueError(f"kernel expects {kernels.shape[2]} input channels, got {c_in}")
    return k


def conv2d_ideal(x, kernels, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Floating-point convolution through the same im2col lowering."""
    xb, single = _as_batch(x)
    kernels = np.asarray(kernels, dtype=float)
    k = _check_kernel(kernels, xb.shape[-1])
    if stride < 1:
        raise ValueError("stride must be at least 1")
    out = im2col(xb, k, stride, padding) @ kernels.reshape(-1, kernels.shape[3])
    return out[0] if single else out


def conv2d(
    x,
    kernels,
    stride: int = 1,
    padding: int = 0,
    pair: ConductancePair = DEFAULT_PAIR,
    noise: DeviceNoise | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Convolution evaluated as crossbar column currents.

    Kernels are programmed with w_max = max|K| and inputs applied as voltages
    scaled so max|x| maps to V_read; currents are rescaled to weight units.
    """
    xb_in, single = _as_batch(x)
    kernels = np.asarray(kernels, dtype=float)
    k = _check_kernel(kernels, xb_in.shape[-1])
    if stride < 1:
        raise ValueError("stride must be at least 1")
    w = kernels.reshape(-1, kernels.shape[3])
    w_max = float(np.max(np.abs(w))) or 1.0
    arr = encode_weights(w, pair, w_max, noise=noise, rng=rng)
    cols = im2col(xb_in, k, stride, padding)
    x_max = float(np.max(np.abs(cols))) or 1.0
    volts = cols * (arr.v_read / x_max)
    out = mvm(arr, volts, rng) * (x_max / (arr.v_read * arr.g_unit))
    return out[0] if single else out


def zero_insert(x, s: int = 2) -> np.ndarray:
    """Spread inputs to (s i + 1, s j + 1) of a zero map of extent (s H + 1, s W + 1)."""
    if s < 1:
        raise ValueError("stride must be at least 1")
    xb, single = _as_batch(x)
    n, h, w, c = xb.shape
    out = np.zeros((n, s * h + 1, s * w + 1, c))
    out[:, 1 : s * h : s, 1 : s * w : s] = xb
    return out[0] if single else out


def deconv2d(x, kernels, stride: int = 2, **conv_kw) -> np.ndarray:
    """Transposed convolution: zero insertion, 'same' convolution, crop to s x extent.

    The result equals the adjoint of a stride-``s`` convolution whose kernel is
    ``kernels`` flipped in space with input and output channels swapped.
    """
    kernels = np.asarray(kernels, dtype=float)
    k = kernels.shape[0]
    z = zero_insert(x, stride)
    out = conv2d(z, kernels, 1, (k - 1) // 2, **conv_kw)
    return out[..., 1:, 1:, :]


def deconv2d_ideal(x, kernels, stride: int = 2) -> np.ndarray:
    kernels = np.asarray(kernels, dtype=float)
    z = zero_insert(x, stride)
    return conv2d_ideal(z, kernels, 1, (kernels.shape[0] - 1) // 2)[..., 1:, 1:, :]


# --------------------------------------------------------------------------- #
# binary tensor files

_MAGIC = b"SPTN"
_DTYPES = {1: "<f8", 2: "<f4", 3: "<i8", 4: "<i4", 5: "|u1"}
_CODES = {np.dtype(v).str: k for k, v in _DTYPES.items()}


def tensor_to_bytes(a) -> bytes:
    """Header ``SPTN`` | u8 version | u8 dtype code | u16 ndim | ndim x u64 dims, then C-order data."""
    a = np.ascontiguousarray(a)
    le = a.astype(a.dtype.newbyteorder("<")) if a.dtype.byteorder == ">" else a
    code = _CODES.get(np.dtype(le.dtype).str)
    if code is None:
        raise ValueError(f"unsupported dtype {a.dtype}")
    head = _MAGIC + struct.pack("<BBH", 1, code, a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    return head + le.tobytes(order="C")


def tensor_from_bytes(buf: bytes) -> np.ndarray:
    if buf[:4] != _MAGIC:
        raise ValueError("not a tensor file")
    version, code, ndim = struct.unpack_from("<BBH", buf, 4)
    if version != 1 or code not in _DTYPES:
        raise ValueError("unsupported tensor header")
    dims = struct.unpack_from(f"<{ndim}Q", buf, 8)
    offset = 8 + 8 * ndim
    dtype = np.dtype(_DTYPES[code])
    count = int(np.prod(dims)) if ndim else 1
    if len(buf) - offset != count * dtype.itemsize:
        raise ValueError("tensor payload size does not match header")
    return np.frombuffer(buf, dtype=dtype, count=count, offset=offset).reshape(dims).copy()


def save_tensor(path: str | Path, a) -> None:
    Path(path).write_bytes(tensor_to_bytes(a))


def load_tensor(path: str | Path) -> np.ndarray:
    return tensor_from_bytes(Path(path).read_bytes())
