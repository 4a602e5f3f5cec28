"""Shared numerical kernels: dense complex solves, stochastic Heun steps,
damped fixed-point iteration and deterministic random streams."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

COND_LIMIT = 1.0e12


class NumericalError(RuntimeError):
    """Base class for numerical failures (CLI exit code 3)."""


class SolverError(NumericalError):
    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class IntegrationError(NumericalError):
    def __init__(self, message: str, state):
        super().__init__(message)
        self.state = state


class ConvergenceError(NumericalError):
    def __init__(self, message: str, residual: float, x=None):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual
        self.x = x


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream keyed by ``(seed, stream_id)``.

    Streams with the same key yield identical sequences; distinct stream ids
    are derived through :class:`numpy.random.SeedSequence` spawn keys and are
    statistically independent.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        """Sub-stream for worker/trial ``index``; keeps the seed, remaps the id."""
        return RngStream(self.seed, self.stream_id * 1_000_003 + index + 1)


def solve_linear(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` by LU with partial pivoting.

    Accepts stacks of systems (leading batch dimensions). Raises
    :class:`SolverError` when any matrix is singular or its 1-norm condition
    estimate exceeds ``COND_LIMIT``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != a.shape[-2]:
        raise ValueError(f"matrix must be square, got {a.shape[-2:]}")
    if b.shape[-2] != a.shape[-1]:
        raise ValueError(f"row mismatch: A is {a.shape[-2:]}, B is {b.shape[-2:]}")
    try:
        cond = np.abs(np.linalg.cond(a, 1))
    except np.linalg.LinAlgError:
        raise SolverError("singular matrix", float("inf")) from None
    worst = float(np.max(cond)) if np.ndim(cond) else float(cond)
    if not np.isfinite(worst) or worst > COND_LIMIT:
        raise SolverError("ill-conditioned matrix", worst)
    return np.linalg.solve(a, b)


def heun_sde_step(
    state: np.ndarray,
    drift: Callable[[np.ndarray], np.ndarray],
    diffusion: np.ndarray | float,
    dt: float,
    rng: np.random.Generator | None,
) -> np.ndarray:
    """One stochastic Heun (Stratonovich) step of ``dx = f(x) dt + s dW``.

    The Wiener increment is shared between predictor and corrector. With
    zero diffusion no random numbers are drawn and the step is the
    deterministic trapezoidal Heun scheme.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(state, dtype=float)
    f0 = np.asarray(drift(x), dtype=float)
    if not np.all(np.isfinite(f0)):
        raise IntegrationError("non-finite drift", x)
    s = np.asarray(diffusion, dtype=float)
    if np.any(s != 0.0):
        if rng is None:
            raise ValueError("a random generator is required for non-zero diffusion")
        dw = s * rng.standard_normal(x.shape) * np.sqrt(dt)
    else:
        dw = 0.0
    pred = x + f0 * dt + dw
    f1 = np.asarray(drift(pred), dtype=float)
    if not np.all(np.isfinite(f1)):
        raise IntegrationError("non-finite drift at predictor", pred)
    return x + 0.5 * (f0 + f1) * dt + dw


def fixed_point(
    f: Callable[[np.ndarray], np.ndarray],
    x0,
    damping: float = 1.0,
    tol: float = 1e-10,
    max_iter: int = 1000,
):
    """Damped fixed-point iteration ``x <- (1-d) x + d f(x)``.

    Returns the first iterate with ``max|f(x) - x| <= tol``.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    scalar = np.ndim(x0) == 0
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    residual = float("inf")
    for _ in range(max_iter + 1):
        fx = np.atleast_1d(np.asarray(f(x[0] if scalar else x), dtype=float))
        residual = float(np.max(np.abs(fx - x)))
        if not np.isfinite(residual):
            break
        if residual <= tol:
            return x[0] if scalar else x
        x = (1.0 - damping) * x + damping * fx
    raise ConvergenceError("fixed-point iteration did not converge", residual, x)
