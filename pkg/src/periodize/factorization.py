"""Plane-wave factorizations of the far-field image sums.

A directional part is stored as a list of plane waves.  Rank ``r`` has a
complex wavevector ``k_r``; the left and right factors are
``L(t, r) = exp(k_r . (t - a_t))`` and ``R(r, s) = exp(-k_r . (s - a_s))``,
so ``L R = exp(k_r . (t - s)) * exp(k_r . (a_t - a_s))`` with the anchor
factor folded into the stored weights.  Anchors sit on the cell's bounding
box so that every stored exponential has non-positive real exponent.

The kernel contributed by rank ``r`` is

    exp(k_r . (t - s)) [C0_r + (u . (t - s)) C1_r]

where ``u`` is the unit vector pointing from the image sources toward the
cell.  ``C1`` carries the linear factor that appears in the Stokes limit.
Zero-frequency modes of unscreened kernels are replaced by low-order
polynomial terms (``PolyTerm``).

Derivations start from a representation valid in the half plane ``x > 0``
(a list of :class:`Family` objects) and are rotated into each direction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .cell import UnitCell
from .errors import NotNeutral


class Direction(enum.Enum):
    SOUTH = "south"
    NORTH = "north"
    WEST = "west"
    EAST = "east"

    @property
    def axis(self) -> np.ndarray:
        """Unit vector ``u`` pointing from the image sources to the cell."""
        return {
            Direction.SOUTH: np.array([0.0, 1.0]),
            Direction.NORTH: np.array([0.0, -1.0]),
            Direction.WEST: np.array([1.0, 0.0]),
            Direction.EAST: np.array([-1.0, 0.0]),
        }[self]

    @property
    def transverse(self) -> np.ndarray:
        """``v``, the axis rotated by +90 degrees."""
        u = self.axis
        return np.array([-u[1], u[0]])

    @property
    def rotation(self) -> np.ndarray:
        """Rotation taking (e_x, e_y) to (u, v)."""
        return np.column_stack([self.axis, self.transverse])

    @property
    def vertical(self) -> bool:
        return self in (Direction.SOUTH, Direction.NORTH)


class Kind(enum.Enum):
    DISCRETE_VERTICAL = "vertical"
    QUADRATURE_HORIZONTAL = "horizontal"


@dataclass(frozen=True)
class PolyTerm:
    """``matrix * y_t**target_power * sum_j y_j**source_power q_j``."""

    target_power: int
    source_power: int
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class PlaneWaveFactorization:
    direction: Direction
    kind: Kind
    freq: np.ndarray          # transverse frequency (alpha_m or lambda_n)
    decay: np.ndarray         # chi >= 0 along the axis
    coef: np.ndarray          # (r, p, q) complex, anchors folded in
    lin: np.ndarray | None    # (r, p, q) complex or None
    poly: tuple = ()
    take_real_part: bool = True
    anchor_t: np.ndarray = field(default_factory=lambda: np.zeros(2))
    anchor_s: np.ndarray = field(default_factory=lambda: np.zeros(2))
    modes: np.ndarray | None = None   # integer m for vertical parts
    period: float = 0.0               # d, for vertical parts
    neutral: bool = False             # right factor may drop its constant
    gauge: bool = False               # left factor may drop it too (field up to a constant)

    @property
    def rank(self) -> int:
        return int(self.freq.size)

    @property
    def low_frequency(self) -> np.ndarray:
        """Ranks whose exponentials stay near 1 across the cell."""
        width = 2 * np.max(np.abs(self.anchor_s)) or 1.0
        return self.decay * width < 1.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.coef.shape[1], self.coef.shape[2]

    @property
    def wavevectors(self) -> np.ndarray:
        return wavevectors(self.direction, self.decay, self.freq)

    @property
    def diag(self) -> np.ndarray:
        """Diagonal weights with the anchor scaling removed."""
        k = self.wavevectors
        return self.coef * np.exp(-k @ (self.anchor_t - self.anchor_s))[:, None, None]


def wavevectors(direction: Direction, decay, freq) -> np.ndarray:
    """``k = -decay * u + i * freq * w`` with ``w`` the transverse coordinate axis."""
    w = np.array([1.0, 0.0]) if direction.vertical else np.array([0.0, 1.0])
    return -np.outer(decay, direction.axis) + 1j * np.outer(freq, w)


@dataclass(frozen=True)
class Family:
    """One pole family of a half-plane (x > 0) representation

        K(X, Y) = int exp(-kappa(lam) X + i lam Y) [A(lam) + X B(lam)] dlam.

    ``A`` and ``B`` return arrays of shape (n, p, q).  ``rot_out``/``rot_in``
    say whether the output/input index is a planar vector (rotates with the
    frame) or a scalar.  ``unscreened`` marks kappa(0) = 0; its zero mode is
    dropped from the discrete sums.
    """

    kappa: Callable[[np.ndarray], np.ndarray]
    A: Callable[[np.ndarray], np.ndarray]
    B: Callable[[np.ndarray], np.ndarray] | None = None
    rot_out: bool = False
    rot_in: bool = False
    unscreened: bool = False
    beta: float = 0.0


def _rotate(block: np.ndarray, fam: Family, R: np.ndarray) -> np.ndarray:
    out = block
    if fam.rot_out:
        out = np.einsum("ab,nbc->nac", R, out)
    if fam.rot_in:
        out = np.einsum("nab,cb->nac", out, R)
    return out


def anchors(cell: UnitCell, direction: Direction) -> tuple[np.ndarray, np.ndarray]:
    u = direction.axis
    half = np.array([cell.half_width, 0.5 * cell.eta])
    a_s = u * half
    return -a_s, a_s


def _finish(direction, kind, freq, decay, c0, c1, poly, real, cell, modes=None):
    a_t, a_s = anchors(cell, direction)
    k = wavevectors(direction, decay, freq)
    scale = np.exp(k @ (a_t - a_s))[:, None, None]
    c0 = c0 * scale
    c1 = None if c1 is None else c1 * scale
    return PlaneWaveFactorization(
        direction, kind, np.asarray(freq, float), np.asarray(decay, float),
        c0, c1, tuple(poly), real, a_t, a_s, modes,
        cell.d if direction.vertical else 0.0,
    )


def build_vertical_from_families(
    families: list[Family], cell: UnitCell, M: int, direction: Direction,
    poly=(), real: bool = True,
) -> PlaneWaveFactorization:
    """Image rows n <= -2 (south) or n >= 2 (north), summed over all m.

    Poisson summation in x turns each row into modes alpha_m = 2 pi m / d;
    the rows then form a geometric series in ``exp(-Q_m)``.
    """
    u, v = direction.axis, direction.transverse
    R = direction.rotation
    step = cell.e2 if direction is Direction.SOUTH else -cell.e2
    xs, ys = float(u @ step), float(v @ step)
    m = np.arange(-M, M + 1)
    alpha = 2 * np.pi * m / cell.d
    lam = alpha * v[0]
    freqs, decays, c0s, c1s, modes = [], [], [], [], []
    for fam in families:
        keep = np.ones_like(lam, dtype=bool)
        if fam.unscreened:
            keep = m != 0
        lk = lam[keep]
        kap = fam.kappa(lk)
        Q = kap * xs - 1j * lk * ys
        eq = np.exp(-Q)
        one_minus = -np.expm1(-Q)
        g = np.exp(-2 * Q) / one_minus
        g1 = (1.0 + one_minus) / one_minus
        A = fam.A(lk)
        c0 = A * g[:, None, None]
        c1 = None
        if fam.B is not None:
            B = fam.B(lk)
            c0 = c0 + (xs * g * g1)[:, None, None] * B
            c1 = _rotate(B * g[:, None, None], fam, R) * (2 * np.pi / cell.d)
        c0 = _rotate(c0, fam, R) * (2 * np.pi / cell.d)
        freqs.append(alpha[keep])
        decays.append(kap)
        c0s.append(c0)
        c1s.append(c1)
        modes.append(m[keep])
    return _stack(direction, Kind.DISCRETE_VERTICAL, freqs, decays, c0s, c1s, poly,
                  real, cell, np.concatenate(modes))


def build_horizontal_from_families(
    families: list[Family], rules: list, cell: UnitCell, direction: Direction,
    fold: bool = True,
) -> PlaneWaveFactorization:
    """Image columns |m| >= m0+1 in rows n in {-1, 0, 1} (or n = 0 singly).

    With ``fold`` the rule nodes lam_n > 0 carry weight 2 w_n and the real
    part is taken at the end, valid for real kernels and real strengths.
    Otherwise the nodes +-lam_n are both kept.
    """
    u, v = direction.axis, direction.transverse
    R = direction.rotation
    rows = (-1, 0, 1) if cell.doubly else (0,)
    d, m0 = cell.d, cell.m0
    freqs, decays, c0s, c1s = [], [], [], []
    for fam, rule in zip(families, rules):
        if rule.count == 0:
            continue
        if fold:
            lam, w = rule.lambdas, 2.0 * rule.weights
        else:
            lam = np.concatenate([-rule.lambdas[::-1], rule.lambdas])
            w = np.concatenate([rule.weights[::-1], rule.weights])
        kap = fam.kappa(lam)
        e = np.exp(-kap * d)
        one_minus = -np.expm1(-kap * d)
        geo = np.exp(-(m0 + 1) * kap * d) / one_minus
        geo1 = (1.0 + m0 * one_minus) / one_minus
        A = fam.A(lam)
        B = fam.B(lam) if fam.B is not None else None
        bsum = np.zeros_like(lam, dtype=complex)
        c0 = np.zeros(A.shape, dtype=complex)
        for n in rows:
            shift = -n * cell.e2
            xn, yn = float(u @ shift), float(v @ shift)
            b = np.exp(-kap * xn + 1j * lam * yn)
            bsum += b
            c0 += b[:, None, None] * A
            if B is not None:
                c0 += (b * (d * geo1 + xn))[:, None, None] * B
        scale = (w * geo)[:, None, None]
        c0s.append(_rotate(c0 * scale, fam, R))
        c1s.append(None if B is None else _rotate(B * (bsum[:, None, None] * scale), fam, R))
        freqs.append(lam * v[1])
        decays.append(kap)
    if not freqs:
        p, q = _family_shape(families[0])
        return _finish(direction, Kind.QUADRATURE_HORIZONTAL, np.empty(0), np.empty(0),
                       np.zeros((0, p, q), complex), None, (), fold, cell)
    return _stack(direction, Kind.QUADRATURE_HORIZONTAL, freqs, decays, c0s, c1s, (),
                  fold, cell, None)


def _family_shape(fam: Family) -> tuple[int, int]:
    return fam.A(np.array([1.0])).shape[1:]


def _stack(direction, kind, freqs, decays, c0s, c1s, poly, real, cell, modes):
    freq = np.concatenate(freqs)
    decay = np.concatenate(decays)
    c0 = np.concatenate(c0s)
    if all(c is None for c in c1s):
        c1 = None
    else:
        c1 = np.concatenate([np.zeros_like(c0i) if c1i is None else c1i
                             for c0i, c1i in zip(c0s, c1s)])
    return _finish(direction, kind, freq, decay, c0, c1, poly, real, cell, modes)


# ---------------------------------------------------------------------------
# operations on built factorizations


def source_derivative(part: PlaneWaveFactorization, axis: int) -> PlaneWaveFactorization:
    """Factorization of ``d/ds_axis`` of the kernel (s = source point)."""
    k = part.wavevectors[:, axis][:, None, None]
    ua = part.direction.axis[axis]
    c0 = -k * part.coef
    c1 = None
    if part.lin is not None:
        c0 = c0 - ua * part.lin
        c1 = -k * part.lin
    poly = []
    if axis == 1:
        for term in part.poly:
            if term.source_power > 0:
                poly.append(PolyTerm(term.target_power, term.source_power - 1,
                                     term.source_power * term.matrix))
    return replace(part, coef=c0, lin=c1, poly=tuple(poly))


def combine(parts_and_maps, take_real_part=None) -> PlaneWaveFactorization:
    """Linear combination of factorizations that share their modes.

    ``parts_and_maps`` is a list of ``(part, fn)`` where ``fn`` maps a block
    of shape (..., p, q) to the combined layout.  All parts must have
    identical wavevectors and anchors.
    """
    base = parts_and_maps[0][0]
    c0 = sum(fn(p.coef) for p, fn in parts_and_maps)
    lins = [fn(p.lin) for p, fn in parts_and_maps if p.lin is not None]
    c1 = sum(lins) if lins else None
    poly = []
    for p, fn in parts_and_maps:
        if not np.array_equal(p.freq, base.freq) or not np.array_equal(p.decay, base.decay):
            raise ValueError("cannot combine factorizations with different modes")
        for term in p.poly:
            poly.append(PolyTerm(term.target_power, term.source_power,
                                 fn(term.matrix[None])[0]))
    real = base.take_real_part if take_real_part is None else take_real_part
    return replace(base, coef=c0, lin=c1, poly=tuple(poly), take_real_part=real)


def drop_zero_modes(part: PlaneWaveFactorization) -> PlaneWaveFactorization:
    """Remove ranks whose weights are exactly zero."""
    keep = np.any(part.coef != 0, axis=(1, 2))
    if part.lin is not None:
        keep |= np.any(part.lin != 0, axis=(1, 2))
    if keep.all():
        return part
    return replace(
        part, freq=part.freq[keep], decay=part.decay[keep], coef=part.coef[keep],
        lin=None if part.lin is None else part.lin[keep],
        modes=None if part.modes is None else part.modes[keep],
    )


# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Periodizer:
    """Far-field operator: the sum of the directional parts.

    ``kernel`` is the free-space kernel whose far images are summed.
    ``gauge`` marks outputs defined only up to an additive constant.
    ``normals`` is set for double-layer periodizers; densities are then
    expanded to ``phi_j n_k`` before the parts are applied.
    """

    kernel: object
    beta: float
    cell: UnitCell
    eps: float
    parts: list
    requires_neutrality: bool = False
    gauge: bool = False
    normals: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        if self.gauge:
            self.parts = [replace(p, gauge=True) if p.neutral else p for p in self.parts]

    @property
    def shape(self) -> tuple[int, int]:
        return self.parts[0].shape

    @property
    def rank(self) -> int:
        return sum(p.rank for p in self.parts)

    def expand_strengths(self, strengths) -> np.ndarray:
        q = np.asarray(strengths)
        if q.ndim == 1:
            q = q[:, None]
        if self.normals is not None:
            n = self.normals
            if n.shape[0] != q.shape[0]:
                raise ValueError("one normal per source is required")
            q = (q[:, :, None] * n[:, None, :]).reshape(q.shape[0], 4)
        return q

    def check_neutral(self, strengths) -> None:
        if not self.requires_neutrality:
            return
        q = np.asarray(strengths)
        if q.ndim == 1:
            q = q[:, None]
        if q.shape[0] == 0:
            return
        total = np.abs(q.sum(axis=0))
        scale = np.abs(q).sum(axis=0)
        if np.any(total > 1e-10 * np.maximum(scale, 1e-300) + 1e-300):
            raise NotNeutral(
                f"strengths must sum to zero for {self.label or 'this kernel'}; "
                f"got {q.sum(axis=0)}"
            )

    def apply(self, sources, strengths, targets, path: str = "auto") -> np.ndarray:
        from .apply import apply_periodizer

        return apply_periodizer(self, sources, strengths, targets, path=path)


def tail_bound(cell: UnitCell, M: int) -> float:
    """Closed-form bound on the modes |m| > M of the south sum."""
    a = 2 * math.pi * cell.eta / cell.d
    e = math.exp(-a * (M + 1))
    return e / (2 * math.pi * (M + 1) * (1 - e) * (1 - math.exp(-a)))


def truncation_order(cell: UnitCell, eps: float) -> int:
    a = 2 * math.pi * cell.eta / cell.d
    return math.ceil(math.log(1.0 / ((1.0 - math.exp(-a)) * eps)) / a)
