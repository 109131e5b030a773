"""Applying periodizers: direct and NUFFT-accelerated paths, near field,
and the total periodic field."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .cell import ParticleSystem, UnitCell, near_translations
from .errors import CoincidentPoints, DimensionMismatch
from .factorization import Kind, Periodizer, PlaneWaveFactorization

# elements per exponential block; bounds memory at ~64 MB of complex128
_BLOCK = 1 << 22

RANK_THRESHOLD = 256
POINT_THRESHOLD = 4096


class Path(enum.Enum):
    DIRECT = "direct"
    ACCELERATED = "nufft"
    AUTO = "auto"

    @classmethod
    def parse(cls, value) -> "Path":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        if key in ("accelerated", "nufft", "fast"):
            return cls.ACCELERATED
        return cls(key)


def _as_points(x, name) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.size == 0:
        return a.reshape(0, 2)
    if a.ndim != 2 or a.shape[1] != 2:
        raise DimensionMismatch(f"{name} must have shape (N, 2), got {a.shape}")
    return a


def _as_strengths(q, n, width) -> np.ndarray:
    q = np.asarray(q)
    if q.ndim == 1 and width == 1:
        q = q[:, None]
    if q.ndim != 2 or q.shape != (n, width):
        raise DimensionMismatch(f"strengths must have shape ({n}, {width}), got {q.shape}")
    return q


def _chunks(n: int, rank: int):
    step = max(1, _BLOCK // max(rank, 1))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


def source_moments(part: PlaneWaveFactorization, sources, q):
    """``c0[r] = sum_j R(r, j) q_j`` and ``c1[r] = sum_j R(r, j) (u . s_j) q_j``."""
    k = part.wavevectors
    s = sources - part.anchor_s
    c0 = np.zeros((part.rank, q.shape[1]), dtype=complex)
    c1 = np.zeros_like(c0) if part.lin is not None else None
    us = sources @ part.direction.axis
    for sl in _chunks(s.shape[0], part.rank):
        arg = -(s[sl] @ k.T)
        E = np.expm1(arg) if part.neutral else np.exp(arg)
        c0 += E.T @ q[sl]
        if c1 is not None:
            c1 += (np.exp(arg) if part.neutral else E).T @ (q[sl] * us[sl, None])
    return c0, c1


def mode_weights(part: PlaneWaveFactorization, c0, c1):
    """Apply the diagonal: returns (w0, w1) with the field
    ``sum_r L(t, r) [w0[r] + (u . t) w1[r]]``."""
    w0 = np.einsum("rpq,rq->rp", part.coef, c0)
    w1 = None
    if part.lin is not None:
        w0 = w0 - np.einsum("rpq,rq->rp", part.lin, c1)
        w1 = np.einsum("rpq,rq->rp", part.lin, c0)
    return w0, w1


def evaluate_targets(part: PlaneWaveFactorization, targets, w0, w1) -> np.ndarray:
    k = part.wavevectors
    t = targets - part.anchor_t
    ut = targets @ part.direction.axis
    out = np.zeros((targets.shape[0], w0.shape[1]), dtype=complex)
    # gauge fields drop the constant sum(w0) of the slow ranks, which would
    # otherwise swamp their variation
    low = part.low_frequency if part.neutral and part.gauge else None
    for sl in _chunks(t.shape[0], part.rank):
        arg = t[sl] @ k.T
        L = np.exp(arg)
        L0 = L
        if low is not None and low.any():
            L0 = L.copy()
            L0[:, low] = np.expm1(arg[:, low])
        out[sl] = L0 @ w0
        if w1 is not None:
            out[sl] += ut[sl, None] * (L @ w1)
    return out


def apply_poly(part: PlaneWaveFactorization, sources, q, targets) -> np.ndarray:
    out = np.zeros((targets.shape[0], part.shape[0]), dtype=complex)
    ys, yt = sources[:, 1], targets[:, 1]
    for term in part.poly:
        mom = (ys[:, None] ** term.source_power * q).sum(axis=0)
        out += (yt[:, None] ** term.target_power) * (term.matrix @ mom)[None, :]
    return out


def apply_direct(part: PlaneWaveFactorization, q, sources, targets) -> np.ndarray:
    """Right-to-left product ``L D R q`` in O(r (N_S + N_T)) work.

    ``q`` has shape (N_S, q_dim); returns (N_T, p_dim), real when the part
    takes real parts and ``q`` is real.
    """
    sources = _as_points(sources, "sources")
    targets = _as_points(targets, "targets")
    q = _as_strengths(q, sources.shape[0], part.shape[1])
    if part.take_real_part and np.iscomplexobj(q):
        return apply_direct(part, q.real, sources, targets) + 1j * apply_direct(
            part, q.imag, sources, targets)
    out = np.zeros((targets.shape[0], part.shape[0]), dtype=complex)
    if targets.shape[0] and sources.shape[0]:
        if part.rank:
            c0, c1 = source_moments(part, sources, q)
            w0, w1 = mode_weights(part, c0, c1)
            out += evaluate_targets(part, targets, w0, w1)
        out += apply_poly(part, sources, q, targets)
    return out.real if part.take_real_part else out


def dense_matrix(part: PlaneWaveFactorization, sources, targets) -> np.ndarray:
    """Materialise the part as an (N_T, p, N_S, q) array (small sizes only)."""
    sources = _as_points(sources, "sources")
    targets = _as_points(targets, "targets")
    k = part.wavevectors
    L = np.exp((targets - part.anchor_t) @ k.T)
    R = np.exp(-(sources - part.anchor_s) @ k.T)
    out = np.einsum("tr,rpq,sr->tpsq", L, part.coef, R)
    if part.lin is not None:
        u = part.direction.axis
        du = (targets @ u)[:, None] - (sources @ u)[None, :]
        out += np.einsum("tr,rpq,sr,ts->tpsq", L, part.lin, R, du)
    for term in part.poly:
        yy = np.outer(targets[:, 1] ** term.target_power, sources[:, 1] ** term.source_power)
        out += yy[:, None, :, None] * term.matrix[None, :, None, :]
    return out.real if part.take_real_part else out


# ---------------------------------------------------------------------------
# path selection


def accelerated_available() -> bool:
    from .nufft import accelerated_backend

    return accelerated_backend() is not None


def choose_path(part: PlaneWaveFactorization, n_sources: int, n_targets: int,
                override=None, cell: UnitCell | None = None) -> Path:
    """Accelerated iff rank > 256, N_S + N_T > 4096 and a NUFFT backend exists.

    ``override`` ('direct' or 'nufft') wins over the rule.  East/west parts
    of doubly periodic cells always go direct.
    """
    if override is not None:
        override = Path.parse(override)
        if override is Path.DIRECT:
            return override
        if override is Path.ACCELERATED:
            return Path.ACCELERATED if _accelerable(part, cell) else Path.DIRECT
    if (part.rank > RANK_THRESHOLD and n_sources + n_targets > POINT_THRESHOLD
            and accelerated_available() and _accelerable(part, cell)):
        return Path.ACCELERATED
    return Path.DIRECT


def _accelerable(part: PlaneWaveFactorization, cell: UnitCell | None) -> bool:
    if part.kind is Kind.DISCRETE_VERTICAL:
        return True
    return cell is not None and not cell.doubly


def apply_part(part, q, sources, targets, path="auto", cell: UnitCell | None = None,
               eps: float | None = None) -> np.ndarray:
    chosen = choose_path(part, len(sources), len(targets), path, cell)
    if chosen is Path.ACCELERATED:
        from .fast import apply_accelerated

        return apply_accelerated(part, q, sources, targets, eps, cell)
    return apply_direct(part, q, sources, targets)


def apply_periodizer(per: Periodizer, sources, strengths, targets, path="auto") -> np.ndarray:
    """Far field of all directional parts; shape (N_T, p), or (N_T,) for scalars."""
    sources = _as_points(sources, "sources")
    targets = _as_points(targets, "targets")
    q = per.expand_strengths(strengths) if sources.shape[0] else np.zeros((0, per.shape[1]))
    per.check_neutral(strengths if per.normals is None else q)
    out = np.zeros((targets.shape[0], per.shape[0]),
                   dtype=complex if per.kernel.is_complex else float)
    for part in per.parts:
        val = apply_part(part, q, sources, targets, path, per.cell, per.eps)
        out = out + (val if per.kernel.is_complex else np.real(val))
    return out[:, 0] if per.shape[0] == 1 else out


# ---------------------------------------------------------------------------
# near field


class FreeSpaceEvaluator(Protocol):
    def __call__(self, kernel, sources, strengths, targets) -> np.ndarray: ...


def direct_free_space(kernel, sources, strengths, targets) -> np.ndarray:
    """Direct O(N_S N_T) free-space sum; exact coincidences are skipped."""
    sources = _as_points(sources, "sources")
    targets = _as_points(targets, "targets")
    p, qd = kernel.shape
    q = np.asarray(strengths).reshape(sources.shape[0], qd)
    out = np.zeros((targets.shape[0], p), dtype=complex if kernel.is_complex or
                   np.iscomplexobj(q) else float)
    if not sources.shape[0]:
        return out
    step = max(1, (1 << 20) // max(sources.shape[0], 1))
    for start in range(0, targets.shape[0], step):
        t = targets[start:start + step]
        dx = t[:, None, 0] - sources[None, :, 0]
        dy = t[:, None, 1] - sources[None, :, 1]
        hit = (dx == 0) & (dy == 0)
        if hit.any():
            dx = np.where(hit, 1.0, dx)
        blk = kernel.block(dx, dy)
        if hit.any():
            blk[hit] = 0.0
        out[start:start + step] = np.einsum("tspq,sq->tp", blk, q)
    return out


def near_field(kernel, cell: UnitCell, sources, strengths, targets,
               evaluator: FreeSpaceEvaluator = direct_free_space) -> np.ndarray:
    """Sum over the near translations, including the cell itself."""
    sources = _as_points(sources, "sources")
    total = None
    for tr in near_translations(cell):
        val = evaluator(kernel, sources + np.asarray(tr.vector), strengths, targets)
        total = val if total is None else total + val
    return total


@dataclass
class FieldResult:
    values: np.ndarray
    near: np.ndarray
    far: np.ndarray
    pressure: np.ndarray | None = None


def total_field(periodizer: Periodizer, system: ParticleSystem, path="auto",
                evaluator: FreeSpaceEvaluator = direct_free_space) -> FieldResult:
    """Periodic field: near-region free-space sum plus the far-field operator."""
    per = periodizer
    far = per.apply(system.sources, system.strengths, system.targets, path=path)
    q = per.expand_strengths(system.strengths) if system.n_sources else np.zeros((0, per.shape[1]))
    near = near_field(per.kernel, per.cell, system.sources, q, system.targets, evaluator)
    if per.shape[0] == 1:
        near = near[:, 0]
    if not per.kernel.is_complex:
        near = np.real(near)
    return FieldResult(near + far, near, far)


def check_not_coincident(sources, targets) -> None:
    s = {tuple(p) for p in np.asarray(sources).reshape(-1, 2)}
    for t in np.asarray(targets).reshape(-1, 2):
        if tuple(t) in s:
            raise CoincidentPoints(f"target {t} coincides with a source")
