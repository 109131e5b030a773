"""Unit cell geometry, lattice translations and near/far index sets.

The lattice is spanned by ``e1 = (d, 0)`` and ``e2 = (xi, eta)``.  Points of
the closed cell are ``x1*e1 + x2*e2`` with ``x1, x2`` in ``[-1/2, 1/2]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDimension, OrientationViolation


class Periodicity(enum.Enum):
    SINGLY = 1
    DOUBLY = 2

    @classmethod
    def parse(cls, value) -> "Periodicity":
        if isinstance(value, cls):
            return value
        if str(value).lower() in ("1", "singly", "p1"):
            return cls.SINGLY
        if str(value).lower() in ("2", "doubly", "p2"):
            return cls.DOUBLY
        raise ValueError(f"unknown periodicity {value!r}")


@dataclass(frozen=True)
class LatticeTranslation:
    m: int
    n: int
    vector: tuple[float, float]


@dataclass(frozen=True)
class UnitCell:
    d: float
    xi: float
    eta: float
    periodicity: Periodicity
    m0: int
    aspect: float

    @property
    def e1(self) -> np.ndarray:
        return np.array([self.d, 0.0])

    @property
    def e2(self) -> np.ndarray:
        return np.array([self.xi, self.eta])

    @property
    def doubly(self) -> bool:
        return self.periodicity is Periodicity.DOUBLY

    @property
    def half_width(self) -> float:
        """Half extent of the cell's bounding box along x."""
        return 0.5 * (self.d + abs(self.xi))

    def translation(self, m: int, n: int) -> LatticeTranslation:
        return LatticeTranslation(m, n, (m * self.d + n * self.xi, n * self.eta))

    def lattice_vectors(self, m, n) -> np.ndarray:
        """Vectorised ``m*e1 + n*e2``; returns an array of shape (..., 2)."""
        m = np.asarray(m, dtype=float)
        n = np.asarray(n, dtype=float)
        return np.stack([m * self.d + n * self.xi, n * self.eta], axis=-1)

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        """Closed-cell membership test for an array of points."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        x2 = p[:, 1] / self.eta
        x1 = (p[:, 0] - x2 * self.xi) / self.d
        inside = (np.abs(x1) <= 0.5 + tol) & (np.abs(x2) <= 0.5 + tol)
        return inside


def _choose_m0(d: float, xi: float) -> int:
    if xi == 0.0:
        return 1
    return min(3, max(1, math.ceil(1.0 + 2.0 * abs(xi) / d - 1e-12)))


def make_unit_cell(d: float, xi: float, eta: float, periodicity="doubly") -> UnitCell:
    """Validate lattice parameters and derive the aspect ratio and ``m0``."""
    periodicity = Periodicity.parse(periodicity)
    if not (d > 0 and eta > 0):
        raise NonPositiveDimension(f"need d > 0 and eta > 0, got d={d}, eta={eta}")
    if periodicity is Periodicity.SINGLY:
        return UnitCell(float(d), 0.0, float(eta), periodicity, 1, max(1.0, eta / d))
    if d < math.hypot(xi, eta) * (1 - 1e-13):
        raise OrientationViolation(
            f"d={d} < |e2|={math.hypot(xi, eta)}; rotate the lattice so the "
            "longest vector lies along x"
        )
    return UnitCell(float(d), float(xi), float(eta), periodicity, _choose_m0(d, xi), d / eta)


def cell_from_aspect(aspect: float, theta: float = math.pi / 2, periodicity="doubly") -> UnitCell:
    """Cell with ``d = 1`` and the given aspect ratio and lattice angle.

    Doubly: ``eta = 1/aspect`` and ``e2`` makes angle ``theta`` with ``e1``.
    Singly: a rectangle of height ``aspect``.
    """
    periodicity = Periodicity.parse(periodicity)
    if periodicity is Periodicity.SINGLY:
        return make_unit_cell(1.0, 0.0, float(aspect), periodicity)
    eta = 1.0 / aspect
    xi = 0.0 if abs(theta - math.pi / 2) < 1e-15 else eta / math.tan(theta)
    return make_unit_cell(1.0, xi, eta, periodicity)


def near_translations(cell: UnitCell) -> list[LatticeTranslation]:
    if not cell.doubly:
        return [cell.translation(m, 0) for m in (-1, 0, 1)]
    return [
        cell.translation(m, n)
        for n in (-1, 0, 1)
        for m in range(-cell.m0, cell.m0 + 1)
    ]


def is_near(cell: UnitCell, m: int, n: int) -> bool:
    if not cell.doubly:
        return n == 0 and abs(m) <= 1
    return abs(m) <= cell.m0 and abs(n) <= 1


def wrap_to_rectangle(points, cell: UnitCell) -> np.ndarray:
    """Shift points by multiples of ``e1`` into ``[-d/2, d/2)`` along x.

    Points of the cell already have ``|y| <= eta/2``, so only the x shift is
    needed.  Accepts a single point or an array of shape (N, 2).
    """
    p = np.asarray(points, dtype=float)
    out = p.copy()
    x = out[..., 0]
    shifted = x - cell.d * np.floor(x / cell.d + 0.5)
    # Keep points on the right face where they are; only move real outliers.
    keep = np.abs(x) <= 0.5 * cell.d
    out[..., 0] = np.where(keep, x, shifted)
    return out


@dataclass
class ParticleSystem:
    """Sources with strengths plus targets, all in cell coordinates.

    ``strengths`` has shape (N_S,) for charges or (N_S, k) for vector data.
    ``normals`` is only used by double-layer sources.
    """

    sources: np.ndarray
    strengths: np.ndarray
    targets: np.ndarray
    normals: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.sources = np.asarray(self.sources, dtype=float).reshape(-1, 2)
        self.targets = np.asarray(self.targets, dtype=float).reshape(-1, 2)
        self.strengths = np.asarray(self.strengths)
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 2)

    @property
    def n_sources(self) -> int:
        return self.sources.shape[0]

    @property
    def n_targets(self) -> int:
        return self.targets.shape[0]


def random_points(cell: UnitCell, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random points in the cell (parallelogram or rectangle)."""
    u = rng.uniform(-0.5, 0.5, size=(n, 2))
    return u[:, :1] * cell.e1 + u[:, 1:] * cell.e2
