"""NUFFT-accelerated application of plane-wave factorizations.

Vertical parts: sources are anterpolated onto ``M_GL`` Legendre lines in y,
each line is transformed with a type-1 NUFFT in x, the diagonal is applied,
and targets are recovered by a type-2 NUFFT per line plus barycentric
interpolation in y.  Horizontal parts swap the roles of x and y and use
type-3 transforms along y, since their frequencies are quadrature nodes.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .apply import _as_points, _as_strengths, apply_direct, apply_poly, mode_weights
from .cell import UnitCell
from .errors import GridTooCoarse
from .factorization import Kind, PlaneWaveFactorization
from .nufft import Backend, NdftPlan, accelerated_backend, type1, type2, type3, wrap_phase
from .quadrature import barycentric_grid, interp_matrix

# finest eps each grid size is certified for (end-to-end error <= 10 eps)
GRID_PRECISION = {8: 1e-5, 10: 1e-6, 16: 1e-13}


def grid_size(eps: float) -> int:
    return 10 if eps >= 1e-6 else 16


def _check_grid(m_gl: int, eps: float) -> None:
    certified = GRID_PRECISION.get(m_gl)
    if certified is None:
        certified = min((p for n, p in GRID_PRECISION.items() if n <= m_gl), default=1.0)
    if eps < certified:
        raise GridTooCoarse(f"M_GL={m_gl} is certified only down to eps={certified:g}")


def _backend(backend):
    if backend is None:
        return Backend.ACCELERATED if accelerated_backend() is not None else Backend.REFERENCE
    return Backend(backend) if not isinstance(backend, Backend) else backend


def apply_accelerated(part: PlaneWaveFactorization, q, sources, targets, eps: float | None = None,
                      cell: UnitCell | None = None, m_gl: int | None = None,
                      backend=None) -> np.ndarray:
    """Same contract as :func:`apply_direct`, computed with NUFFTs."""
    sources = _as_points(sources, "sources")
    targets = _as_points(targets, "targets")
    q = _as_strengths(q, sources.shape[0], part.shape[1])
    eps = 1e-12 if eps is None else eps
    m_gl = grid_size(eps) if m_gl is None else m_gl
    _check_grid(m_gl, eps)
    if part.take_real_part and np.iscomplexobj(q):
        return (apply_accelerated(part, q.real, sources, targets, eps, cell, m_gl, backend)
                + 1j * apply_accelerated(part, q.imag, sources, targets, eps, cell, m_gl, backend))
    out = np.zeros((targets.shape[0], part.shape[0]), dtype=complex)
    if not (targets.shape[0] and sources.shape[0]):
        return out.real if part.take_real_part else out
    if part.kind is Kind.DISCRETE_VERTICAL:
        out += _vertical(part, q, sources, targets, eps, m_gl, _backend(backend))
        out += apply_poly(part, sources, q, targets)
        return out.real if part.take_real_part else out
    slow, fast = _split_low_frequencies(part)
    if slow is not None and slow.rank:
        out += apply_direct(replace(slow, take_real_part=False), q, sources, targets)
    if fast.rank:
        out += _horizontal(fast, q, sources, targets, eps, m_gl, _backend(backend))
    out += apply_poly(part, sources, q, targets)
    return out.real if part.take_real_part else out


def _subset(part, keep):
    return replace(part, freq=part.freq[keep], decay=part.decay[keep], coef=part.coef[keep],
                   lin=None if part.lin is None else part.lin[keep],
                   modes=None if part.modes is None else part.modes[keep], poly=())


def _split_low_frequencies(part):
    """Neutral parts carry weights ~ 1/lambda^2 near zero; those ranks stay on
    the direct path, where the right factor is formed without cancellation."""
    if not part.neutral:
        return None, replace(part, poly=())
    low = part.low_frequency
    return _subset(part, low), replace(_subset(part, ~low), neutral=False)


def _moments_input(part, sources, q):
    """Strength columns: q, and (u . s) q when the part has a linear term."""
    cols = [q]
    if part.lin is not None:
        cols.append(q * (sources @ part.direction.axis)[:, None])
    return np.concatenate(cols, axis=1)


def _vertical(part, q, sources, targets, eps, m_gl, backend):
    d = part.period
    uy = part.direction.axis[1]
    half = abs(part.anchor_s[1])
    grid = barycentric_grid(m_gl, half)
    k = part.wavevectors
    modes = part.modes
    M = int(np.max(np.abs(modes))) if modes.size else 0
    idx = modes + M
    tol = max(eps / 3, 1e-14)

    # anterpolation and type-1 per grid line
    G = interp_matrix(sources[:, 1], grid)                      # (N_S, M_GL)
    strengths = _moments_input(part, sources, q)               # (N_S, c)
    batch = (G[:, :, None] * strengths[:, None, :]).reshape(sources.shape[0], -1).T
    plan = NdftPlan(-2 * np.pi * sources[:, 0] / d, M, tol, backend)
    F = type1(plan, batch).reshape(m_gl, strengths.shape[1], 2 * M + 1)
    ey = np.exp(-k[:, 1][:, None] * (grid.nodes[None, :] - part.anchor_s[1]))  # (r, M_GL)
    mom = np.einsum("rn,ncr->rc", ey, F[:, :, idx])
    qd = q.shape[1]
    c0 = mom[:, :qd]
    c1 = mom[:, qd:] if part.lin is not None else None
    w0, w1 = mode_weights(part, c0, c1)

    # per-line mode sums, type-2, interpolation in y
    et = np.exp(k[:, 1][:, None] * (grid.nodes[None, :] - part.anchor_t[1]))   # (r, M_GL)
    ws = [w0] if w1 is None else [w0, w1]
    W = np.concatenate(ws, axis=1)                             # (r, c')
    lines = np.zeros((m_gl, W.shape[1], 2 * M + 1), dtype=complex)
    np.add.at(lines, (slice(None), slice(None), idx),
              np.einsum("rn,rc->ncr", et, W))
    tplan = NdftPlan(-2 * np.pi * targets[:, 0] / d, M, tol, backend)
    V = type2(tplan, lines.reshape(-1, 2 * M + 1)).reshape(m_gl, W.shape[1], -1)
    Gt = interp_matrix(targets[:, 1], grid)                    # (N_T, M_GL)
    vals = np.einsum("tn,nct->tc", Gt, V)
    p = part.shape[0]
    out = vals[:, :p]
    if w1 is not None:
        out = out + (targets @ part.direction.axis)[:, None] * vals[:, p:]
    return out


def _horizontal(part, q, sources, targets, eps, m_gl, backend):
    ux = part.direction.axis[0]
    half = abs(part.anchor_s[0])
    grid = barycentric_grid(m_gl, half)
    k = part.wavevectors
    tol = max(eps / 3, 1e-14)
    f = part.freq

    G = interp_matrix(sources[:, 0], grid)
    strengths = _moments_input(part, sources, q)
    batch = (G[:, :, None] * strengths[:, None, :]).reshape(sources.shape[0], -1).T
    F = type3(sources[:, 1], batch, -f, tol, backend).reshape(m_gl, strengths.shape[1], -1)
    ex = np.exp(-k[:, 0][:, None] * (grid.nodes[None, :] - part.anchor_s[0]))
    mom = np.einsum("rn,ncr->rc", ex, F)
    qd = q.shape[1]
    c0 = mom[:, :qd]
    c1 = mom[:, qd:] if part.lin is not None else None
    w0, w1 = mode_weights(part, c0, c1)

    et = np.exp(k[:, 0][:, None] * (grid.nodes[None, :] - part.anchor_t[0]))
    W = np.concatenate([w0] if w1 is None else [w0, w1], axis=1)
    lines = np.einsum("rn,rc->ncr", et, W).reshape(-1, f.size)
    V = type3(f, lines, targets[:, 1], tol, backend).reshape(m_gl, W.shape[1], -1)
    Gt = interp_matrix(targets[:, 0], grid)
    vals = np.einsum("tn,nct->tc", Gt, V)
    p = part.shape[0]
    out = vals[:, :p]
    if w1 is not None:
        out = out + (targets @ part.direction.axis)[:, None] * vals[:, p:]
    return out


__all__ = ["apply_accelerated", "grid_size", "GRID_PRECISION", "wrap_phase"]
