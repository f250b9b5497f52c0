"""Adaptive Dormand-Prince 5(4) integrator with dense output.

Works on real or complex state vectors. After each accepted step the state
may be rescaled to unit norm; the recorded norm is the value before that
rescaling, so drift stays visible.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# Butcher tableau (Hairer, Norsett & Wanner, Solving ODEs I, Table 5.2)
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array(A[6] + [0.0])
E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension of order 4
D = np.array([
    -12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
    -10690763975 / 1880347072, 701980252875 / 199316789632,
    -1453857185 / 822651844, 69997945 / 29380423,
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ORDER = 5


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t = {t!r}")
        self.t = t


@dataclass
class Step:
    """One accepted step with everything needed for dense output."""

    t0: float
    h: float
    y0: np.ndarray
    y1: np.ndarray
    k: np.ndarray

    def interpolate(self, t) -> np.ndarray:
        s = (np.asarray(t, dtype=float) - self.t0) / self.h
        y0, y1, k = self.y0, self.y1, self.k
        dy = y1 - y0
        bspl = self.h * k[0] - dy
        r4 = dy - self.h * k[6] - bspl
        r5 = self.h * (D @ k)
        s = s[..., None]
        return y0 + s * (dy + (1 - s) * (bspl + s * (r4 + (1 - s) * r5)))


@dataclass
class IntegrationResult:
    times: np.ndarray
    ys: np.ndarray
    norms: np.ndarray
    stats: Counter = field(default_factory=Counter)


def dopri_step(fun, t: float, y: np.ndarray, f0: np.ndarray, h: float):
    """One Dormand-Prince step. Returns ``(y_new, error_estimate, stages)``."""
    k = np.empty((7,) + y.shape, dtype=np.result_type(y, f0))
    k[0] = f0
    for i in range(1, 7):
        k[i] = fun(t + C[i] * h, y + h * np.tensordot(A[i], k[:i], axes=1))
    y_new = y + h * np.tensordot(B[:6], k[:6], axes=1)
    err = h * np.tensordot(E, k, axes=1)
    return y_new, err, k


def _error_norm(err, y0, y1, rtol, atol) -> float:
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


def _initial_step(fun, t0, y0, f0, rtol, atol) -> float:
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean(np.abs(y0 / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = fun(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(np.abs((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / ORDER)
    return min(100 * h0, h1)


def integrate(fun: Callable, y0, t_final: float, record_times, *, rtol: float = 1e-9,
              atol: float = 1e-12, first_step: Optional[float] = None,
              renormalize: bool = False, max_steps: int = 10_000_000,
              on_step: Optional[Callable[[Step], None]] = None) -> IntegrationResult:
    """Integrate ``dy/dt = fun(t, y)`` from ``t = 0`` to ``t_final``.

    Parameters
    ----------
    record_times : array_like
        Increasing times in ``[0, t_final]`` at which the solution is
        sampled by dense output.
    renormalize : bool
        Rescale ``y`` to unit 2-norm after each accepted step.
    on_step : callable, optional
        Called with each accepted :class:`Step`.

    Raises
    ------
    IntegrationError
        On step-size underflow, non-finite state, or exceeding ``max_steps``.
    """
    y = np.array(y0, dtype=complex if np.iscomplexobj(y0) else float)
    record_times = np.asarray(record_times, dtype=float)
    if record_times.size and (record_times[0] < 0 or record_times[-1] > t_final * (1 + 1e-14)):
        raise ValueError("record times must lie in [0, t_final]")
    if np.any(np.diff(record_times) <= 0):
        raise ValueError("record times must be strictly increasing")

    stats = Counter()
    n_rec = record_times.size
    ys = np.empty((n_rec,) + y.shape, dtype=y.dtype)
    norms = np.empty(n_rec)
    ri = 0
    t = 0.0
    while ri < n_rec and record_times[ri] <= 0.0:
        ys[ri] = y
        norms[ri] = np.linalg.norm(y)
        ri += 1
    if renormalize:
        y = y / np.linalg.norm(y)

    f = np.asarray(fun(t, y))
    stats["n_eval"] += 1
    h = first_step if first_step else _initial_step(fun, t, y, f, rtol, atol)
    eps = np.finfo(float).eps

    while t < t_final:
        if stats["n_accepted"] + stats["n_rejected"] >= max_steps:
            raise IntegrationError("maximum number of steps exceeded", t)
        h_min = 16 * eps * max(abs(t), 1.0)
        if h < h_min:
            raise IntegrationError(f"step size underflow (h = {h:.3e})", t)
        last = t + h >= t_final * (1 - 4 * eps)
        if last:
            h = t_final - t
        y_new, err, k = dopri_step(fun, t, y, f, h)
        stats["n_eval"] += 6
        if not np.all(np.isfinite(y_new)):
            raise IntegrationError("non-finite state", t)
        en = _error_norm(err, y, y_new, rtol, atol)
        if en > 1.0:
            stats["n_rejected"] += 1
            h *= max(MIN_FACTOR, SAFETY * en ** (-1 / ORDER))
            continue

        step = Step(t, h, y, y_new, k)
        t_new = t_final if last else t + h
        j = ri
        while j < n_rec and record_times[j] <= t_new:
            j += 1
        if j > ri:
            yi = step.interpolate(record_times[ri:j])
            yi[record_times[ri:j] == t_new] = y_new
            ni = np.linalg.norm(yi, axis=-1)
            ys[ri:j] = yi / ni[:, None] if renormalize else yi
            norms[ri:j] = ni
            ri = j
        if on_step is not None:
            on_step(step)

        stats["n_accepted"] += 1
        t = t_new
        if renormalize:
            y = y_new / np.linalg.norm(y_new)
            f = np.asarray(fun(t, y))
            stats["n_eval"] += 1
        else:
            y = y_new
            f = k[6]
        factor = MAX_FACTOR if en == 0 else min(MAX_FACTOR, SAFETY * en ** (-1 / ORDER))
        h *= max(MIN_FACTOR, factor)

    return IntegrationResult(record_times[:ri].copy(), ys[:ri], norms[:ri], stats)


def record_grid(t_final: float, record_every: float) -> np.ndarray:
    """Multiples of ``record_every`` in ``[0, t_final]``, plus ``t_final`` itself."""
    if record_every <= 0:
        raise ValueError("record_every must be positive")
    n = int(np.floor(t_final / record_every * (1 + 1e-12)))
    grid = np.arange(n + 1) * record_every
    if t_final - grid[-1] > 1e-9 * record_every:
        grid = np.append(grid, t_final)
    else:
        grid[-1] = min(grid[-1], t_final)
    return grid
