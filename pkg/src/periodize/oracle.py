"""Brute-force lattice sums and the periodicity residual metric."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .cell import ParticleSystem, UnitCell, is_near
from .errors import NotConverged
from .kernels import PDE, Kernel, kernel_for

__all__ = ["brute_force_far", "shell_sum", "far_shell", "periodicity_residual",
           "ResidualReport", "face_samples"]


def far_shell(cell: UnitCell, k: int) -> np.ndarray:
    """Far lattice indices with max(|m|, |n|) == k (|m| == k when singly)."""
    if not cell.doubly:
        return np.array([[m, 0] for m in (-k, k) if not is_near(cell, m, 0)], dtype=int).reshape(-1, 2)
    r = np.arange(-k, k + 1)
    ring = np.concatenate([
        np.stack([r, np.full_like(r, -k)], 1), np.stack([r, np.full_like(r, k)], 1),
        np.stack([np.full(2 * k - 1, -k), r[1:-1]], 1), np.stack([np.full(2 * k - 1, k), r[1:-1]], 1),
    ]) if k > 0 else np.zeros((1, 2), dtype=int)
    keep = [not is_near(cell, int(m), int(n)) for m, n in ring]
    return ring[np.array(keep, dtype=bool)]


def _neutral(q) -> bool:
    q = np.asarray(q)
    return bool(q.size) and bool(np.all(np.abs(q.sum(axis=0)) <= 1e-13 * np.abs(q).sum(axis=0)))


def _anchored_block(kernel: Kernel, rx, ry, lx, ly) -> np.ndarray:
    """``G(r - l) - G(l)`` for the log kernels, without cancellation.

    With neutral strengths the subtracted ``G(l)`` sums to zero, while the
    raw image values ~ log|l| would swamp their O(|r| / |l|) variation.
    """
    l2 = lx * lx + ly * ly
    rl = rx * lx + ry * ly
    rr = rx * rx + ry * ry
    d2 = rr - 2 * rl + l2
    lg = 0.5 * np.log1p((rr - 2 * rl) / l2)          # log|r - l| - log|l|
    if kernel.name == "laplace":
        return (-lg / (2 * np.pi))[..., None, None]
    # (d_i d_j |l|^2 - l_i l_j |d|^2) / (|d|^2 |l|^2) with d = r - l
    r = (rx, ry)
    l = (lx, ly)
    out = np.empty(np.shape(rx) + (2, 2))
    for i in range(2):
        for j in range(2):
            num = (r[i] * r[j] - r[i] * l[j] - l[i] * r[j]) * l2 - l[i] * l[j] * (rr - 2 * rl)
            out[..., i, j] = num / (d2 * l2) - (lg if i == j else 0.0)
    return out / (4 * np.pi)


def _image_sum(kernel: Kernel, cell: UnitCell, sources, q, targets, mn) -> np.ndarray:
    p = kernel.shape[0]
    dtype = complex if kernel.is_complex or np.iscomplexobj(q) else float
    out = np.zeros((targets.shape[0], p), dtype=dtype)
    if mn.size == 0:
        return out
    shifts = cell.lattice_vectors(mn[:, 0], mn[:, 1])
    anchored = kernel.name in ("laplace", "stokes") and _neutral(q)
    # work in blocks of roughly 2**21 kernel evaluations
    per = max(1, (1 << 21) // max(1, sources.shape[0] * shifts.shape[0]))
    for start in range(0, targets.shape[0], per):
        t = targets[start:start + per]
        rx = t[:, None, None, 0] - sources[None, :, None, 0]
        ry = t[:, None, None, 1] - sources[None, :, None, 1]
        lx, ly = shifts[None, None, :, 0], shifts[None, None, :, 1]
        if anchored:
            rx, ry = np.broadcast_arrays(rx, ry, lx)[:2]
            blk = _anchored_block(kernel, rx, ry, *np.broadcast_arrays(lx, rx)[:1],
                                  np.broadcast_arrays(ly, rx)[0])
        else:
            blk = kernel.block(rx - lx, ry - ly)
        out[start:start + per] = np.einsum("tsmpq,sq->tp", blk, q)
    return out


def shell_sum(kernel: Kernel, cell: UnitCell, sources, q, targets, k0: int, k1: int) -> np.ndarray:
    """Sum over far shells k0 <= k <= k1."""
    total = None
    for k in range(k0, k1 + 1):
        val = _image_sum(kernel, cell, sources, q, targets, far_shell(cell, k))
        total = val if total is None else total + val
    return total


def _sigma_min(cell: UnitCell) -> float:
    """min |x e1 + y e2| over the boundary of [-1, 1]^2, so that every
    lattice point of shell k lies at distance >= k times this."""
    e1, e2 = cell.e1, cell.e2
    y = np.clip(-(e1 @ e2) / (e2 @ e2), -1.0, 1.0)
    x = np.clip(-(e1 @ e2) / (e1 @ e1), -1.0, 1.0)
    return float(min(np.linalg.norm(e1 + y * e2), np.linalg.norm(x * e1 + e2)))


def _decay_bound(kernel: Kernel, r: float) -> float | None:
    """Upper bound on every kernel entry at distance >= r, if exponential."""
    if r <= 0:
        return None
    b = kernel.beta
    if kernel.name == "mhelm":
        return special.k0(b * r) / (2 * math.pi)
    if kernel.name == "mhelm_multipole":
        return special.kv(kernel.order, b * r)
    return None


def _tail_bound(kernel: Kernel, cell: UnitCell, sources, targets, q, K: int) -> float | None:
    """Analytic bound on shells k > K for exponentially decaying kernels."""
    if not cell.doubly and kernel.name not in ("mhelm", "mhelm_multipole"):
        return None
    pts = np.vstack([sources, targets])
    diam = float(np.max(np.linalg.norm(pts[:, None] - pts[None], axis=-1))) if pts.size else 0.0
    sig = _sigma_min(cell) if cell.doubly else cell.d
    qn = float(np.abs(q).sum())
    total = 0.0
    for k in range(K + 1, 100 * K + 100):
        bound = _decay_bound(kernel, k * sig - diam)
        if bound is None:
            return None
        count = 8 * k if cell.doubly else 2
        term = count * bound * qn
        total += term
        if term < 1e-30 * max(total, 1e-300) or term == 0.0:
            break
    return total


def _as_kernel(pde, beta, order=None) -> Kernel:
    if isinstance(pde, Kernel):
        return pde
    if order is not None:
        from .kernels import make_multipole_kernel

        return make_multipole_kernel(pde, order, beta)
    return kernel_for(pde, beta)


def brute_force_far(pde, beta: float, cell: UnitCell, system: ParticleSystem, shells: int = 60,
                    tol: float = 1e-12, order: int | None = None, extrapolate: bool | None = None,
                    certify: bool = True) -> np.ndarray:
    """Far-field lattice sum in expanding square shells with +-l pairing.

    ``pde`` is a PDE name or a :class:`Kernel`.  Exponentially decaying
    kernels are certified with an analytic bound on the shells beyond
    ``shells``.  Algebraically decaying kernels are summed to ``4 shells``;
    the per-shell values beyond ``shells`` are fitted to a power series in
    ``1/k`` starting at ``k**-3`` and the fitted tail is added.  Fits over
    (K, 2K] and (K, 4K] must agree to ``tol / 10``.  Pairing cancels the
    slower terms only for cells whose shells are 4-fold symmetric (square
    cells); on other shapes the sums of unscreened kernels are conditionally
    convergent and certification fails.  Raises :class:`NotConverged`.
    """
    kernel = _as_kernel(pde, beta, order)
    if shells < 2:
        raise ValueError("shells must be >= 2")
    S = np.asarray(system.sources, dtype=float).reshape(-1, 2)
    T = np.asarray(system.targets, dtype=float).reshape(-1, 2)
    q = np.asarray(system.strengths)
    q = q.reshape(S.shape[0], -1)
    if system.normals is not None and kernel.name == "stresslet":
        n = np.asarray(system.normals, dtype=float).reshape(-1, 2)
        q = (q[:, :, None] * n[:, None, :]).reshape(S.shape[0], 4)
    base = shell_sum(kernel, cell, S, q, T, 1, shells)
    scale = max(float(np.max(np.abs(base))) if base.size else 0.0, 1e-300)
    exponential = kernel.screened and kernel.name != "mstokes"
    if extrapolate is None:
        extrapolate = not exponential
    if not extrapolate:
        if certify:
            bound = _tail_bound(kernel, cell, S, T, q, shells) if exponential else None
            if bound is None:
                more = shell_sum(kernel, cell, S, q, T, shells + 1, 2 * shells)
                bound = float(np.max(np.abs(more))) if more.size else 0.0
            if bound > tol / 10 * scale:
                raise NotConverged(
                    f"tail after {shells} shells bounded by {bound:.3e}", base, None)
        return _squeeze(base, kernel)
    shells_val = [_image_sum(kernel, cell, S, q, T, far_shell(cell, k))
                  for k in range(shells + 1, 4 * shells + 1)]
    ks = np.arange(shells + 1, 4 * shells + 1)
    stack = np.stack(shells_val)
    full = base + stack.sum(axis=0)
    tail4 = _fit_tail(ks, stack, 4 * shells)
    half = ks <= 2 * shells
    tail2 = _fit_tail(ks[half], stack[half], 2 * shells)
    fine = full + tail4
    coarse = base + stack[half].sum(axis=0) + tail2
    err = float(np.max(np.abs(fine - coarse), initial=0.0))
    if certify and err > tol / 10 * scale:
        raise NotConverged(f"tail estimates differ by {err:.3e}", coarse, fine)
    return _squeeze(fine, kernel)


def _fit_tail(ks, values, last):
    """Fit shell values to c3/k^3 + c4/k^4 + c5/k^5 and sum the model for k > last."""
    basis = np.stack([ks ** -3.0, ks ** -4.0, ks ** -5.0], axis=1)
    flat = values.reshape(values.shape[0], -1)
    scale = basis.max(axis=0)
    coef, *_ = np.linalg.lstsq(basis / scale, np.real(flat), rcond=None)
    tail = sum(coef[i] / scale[i] * special.zeta(3 + i, last + 1) for i in range(3))
    if np.iscomplexobj(flat):
        ci, *_ = np.linalg.lstsq(basis / scale, np.imag(flat), rcond=None)
        tail = tail + 1j * sum(ci[i] / scale[i] * special.zeta(3 + i, last + 1) for i in range(3))
    return tail.reshape(values.shape[1:])


def _squeeze(val, kernel):
    return val[:, 0] if kernel.shape[0] == 1 else val


# ---------------------------------------------------------------------------


@dataclass
class ResidualReport:
    kernel: str
    residuals: dict
    samples: int
    total: float
    sum: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def gate(self) -> float:
        """Larger of the root-sum-square and plain-sum aggregates."""
        return max(self.total, self.sum)

    def as_dict(self) -> dict:
        return {"kernel": self.kernel, "residuals": self.residuals, "samples": self.samples,
                "rss": self.total, "sum": self.sum, "gate": self.gate, **self.extra}


def face_samples(cell: UnitCell, samples: int) -> dict:
    """Pairs of opposite-face targets ``(a, a + e_i)`` keyed by direction."""
    s = np.linspace(-0.5, 0.5, samples)
    a = (-0.5 * cell.e1)[None, :] + s[:, None] * cell.e2[None, :]
    out = {"x": (a, a + cell.e1)}
    if cell.doubly:
        b = (-0.5 * cell.e2)[None, :] + s[:, None] * cell.e1[None, :]
        out["y"] = (b, b + cell.e2)
    return out


def periodicity_residual(field_evaluator: Callable[[np.ndarray], np.ndarray], cell: UnitCell,
                         periodicity=None, samples: int = 500, gauge: bool = False,
                         name: str = "") -> ResidualReport:
    """Relative l2 mismatch of a field between opposite cell faces.

    ``field_evaluator`` maps targets (N, 2) to values (N,) or (N, p).  With
    ``gauge`` the denominator uses the field minus its mean, so additive
    constants do not flatter the metric.
    """
    if samples < 10:
        raise ValueError("samples must be >= 10")
    if periodicity is not None:
        from .scalar import _resolve_cell

        cell = _resolve_cell(cell, periodicity)
    res = {}
    for key, (a, b) in face_samples(cell, samples).items():
        u = np.asarray(field_evaluator(np.vstack([a, b])))
        u = u.reshape(u.shape[0], -1)
        ua, ub = u[:samples], u[samples:]
        den = u - u.mean(axis=0) if gauge else u
        norm = float(np.linalg.norm(den))
        res[key] = float(np.linalg.norm(ua - ub)) / norm if norm > 0 else 0.0
    vals = list(res.values())
    return ResidualReport(name, res, samples, float(math.sqrt(sum(v * v for v in vals))),
                          float(sum(vals)))
