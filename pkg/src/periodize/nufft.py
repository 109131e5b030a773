"""One-dimensional nonuniform discrete Fourier transforms.

type1: ``f_k = sum_j c_j exp(+i k x_j)`` for ``k = -M..M``
type2: ``v_j = sum_k f_k exp(-i k x_j)``
type3: ``v_n = sum_j c_j exp(+i s_n y_j)``

The reference backend evaluates the sums exactly (to roundoff) in blocks.
The accelerated backend wraps finufft when it is installed.  Leading batch
dimensions of the coefficient arrays are transformed independently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import LengthMismatch

_BLOCK = 1 << 21
_OPTIONS: dict = {}


class Backend(enum.Enum):
    REFERENCE = "reference"
    ACCELERATED = "accelerated"


@lru_cache(maxsize=None)
def accelerated_backend():
    """The finufft module, or None when it is not installed."""
    try:
        import finufft
    except ImportError:  # pragma: no cover - depends on the environment
        return None
    return finufft


def set_threads(n: int | None) -> None:
    """Thread count handed to the accelerated backend (None: its default)."""
    if n is None:
        _OPTIONS.pop("nthreads", None)
    elif n < 1:
        raise ValueError("thread count must be >= 1")
    else:
        _OPTIONS["nthreads"] = int(n)


def wrap_phase(x) -> np.ndarray:
    """Map phases into [-pi, pi)."""
    x = np.asarray(x, dtype=float)
    return (x + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class NdftPlan:
    points: np.ndarray
    mode_count: int
    tolerance: float = 1e-12
    backend: Backend = Backend.REFERENCE

    def __post_init__(self):
        if not 1e-14 <= self.tolerance <= 1e-2:
            raise ValueError(f"tolerance {self.tolerance} outside [1e-14, 1e-2]")
        if self.mode_count < 0:
            raise ValueError("mode_count must be non-negative")
        pts = wrap_phase(self.points).ravel()
        object.__setattr__(self, "points", pts)
        if not isinstance(self.backend, Backend):
            object.__setattr__(self, "backend", Backend(self.backend))
        if self.backend is Backend.ACCELERATED and accelerated_backend() is None:
            raise RuntimeError("accelerated NUFFT backend (finufft) is not installed")

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.mode_count, self.mode_count + 1)


def _check(n, arr, what):
    if arr.shape[-1] != n:
        raise LengthMismatch(f"{what} has length {arr.shape[-1]}, expected {n}")


def _reference_sum(out_phase, in_phase, coeffs, sign):
    """``out[..., a] = sum_b coeffs[..., b] exp(sign i out_phase[a] in_phase[b])``."""
    batch = coeffs.shape[:-1]
    flat = coeffs.reshape(-1, coeffs.shape[-1]).astype(complex)
    out = np.zeros((flat.shape[0], out_phase.size), dtype=complex)
    step = max(1, _BLOCK // max(1, out_phase.size))
    for start in range(0, in_phase.size, step):
        sl = slice(start, start + step)
        E = np.exp(sign * 1j * np.outer(in_phase[sl], out_phase))
        out += flat[:, sl] @ E
    return out.reshape(batch + (out_phase.size,))


def _batched(fn, coeffs, inner):
    batch = coeffs.shape[:-1]
    flat = np.ascontiguousarray(coeffs.reshape(-1, coeffs.shape[-1]), dtype=complex)
    res = fn(flat if flat.shape[0] > 1 else flat[0])
    return np.asarray(res).reshape(batch + (inner,))


def type1(plan: NdftPlan, coeffs) -> np.ndarray:
    c = np.asarray(coeffs)
    _check(plan.points.size, c, "coeffs")
    n = 2 * plan.mode_count + 1
    if plan.points.size == 0:
        return np.zeros(c.shape[:-1] + (n,), dtype=complex)
    if plan.backend is Backend.REFERENCE:
        return _reference_sum(plan.modes.astype(float), plan.points, c, +1)
    fin = accelerated_backend()
    return _batched(lambda a: fin.nufft1d1(plan.points, a, n, eps=plan.tolerance, isign=+1,
                                           **_OPTIONS),
                    c, n)


def type2(plan: NdftPlan, modes) -> np.ndarray:
    f = np.asarray(modes)
    n = 2 * plan.mode_count + 1
    _check(n, f, "modes")
    if plan.points.size == 0:
        return np.zeros(f.shape[:-1] + (0,), dtype=complex)
    if plan.backend is Backend.REFERENCE:
        return _reference_sum(plan.points, plan.modes.astype(float), f, -1)
    fin = accelerated_backend()
    return _batched(lambda a: fin.nufft1d2(plan.points, a, eps=plan.tolerance, isign=-1,
                                           **_OPTIONS),
                    f, plan.points.size)


def type3(points, coeffs, freqs, eps: float = 1e-12,
          backend: Backend = Backend.REFERENCE) -> np.ndarray:
    y = np.asarray(points, dtype=float).ravel()
    s = np.asarray(freqs, dtype=float).ravel()
    c = np.asarray(coeffs)
    _check(y.size, c, "coeffs")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(s))):
        raise ValueError("points and frequencies must be finite")
    if y.size == 0 or s.size == 0:
        return np.zeros(c.shape[:-1] + (s.size,), dtype=complex)
    backend = Backend(backend) if not isinstance(backend, Backend) else backend
    if backend is Backend.REFERENCE:
        return _reference_sum(s, y, c, +1)
    fin = accelerated_backend()
    if fin is None:
        raise RuntimeError("accelerated NUFFT backend (finufft) is not installed")
    return _batched(lambda a: fin.nufft1d3(y, a, s, eps=max(eps, 1e-14), isign=+1,
                                          **_OPTIONS),
                    c, s.size)


def dft_matrix(points, mode_count: int) -> np.ndarray:
    """Dense ``exp(i k x_j)`` matrix with rows j and columns k = -M..M."""
    k = np.arange(-mode_count, mode_count + 1)
    return np.exp(1j * np.outer(np.asarray(points, dtype=float), k))


def fft_reference_time(n: int) -> float:
    """Wall time of one complex FFT of length n (benchmark yardstick)."""
    import time

    x = np.random.default_rng(0).standard_normal(n) + 0j
    np.fft.fft(x)
    t = time.perf_counter()
    np.fft.fft(x)
    return time.perf_counter() - t


__all__ = ["Backend", "NdftPlan", "type1", "type2", "type3", "wrap_phase",
           "accelerated_backend", "dft_matrix", "fft_reference_time", "set_threads"]
