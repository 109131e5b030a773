"""Periodizers for the modified Helmholtz and Poisson equations."""

from __future__ import annotations

import numpy as np

from .cell import Periodicity, UnitCell, make_unit_cell
from .errors import MissingBeta, NotDoubly, RuleMismatch
from .factorization import (
    Direction,
    Family,
    Periodizer,
    PlaneWaveFactorization,
    PolyTerm,
    build_horizontal_from_families,
    build_vertical_from_families,
    tail_bound,
    truncation_order,
)
from .kernels import PDE, Kernel
from .quadrature import QuadratureRule, sommerfeld_rule

__all__ = [
    "truncation_order", "tail_bound", "build_vertical", "build_horizontal",
    "assemble", "mhelm_family", "laplace_family", "SMALL_BETA",
]

# below this, modified Helmholtz is only accepted for neutral charges
SMALL_BETA = 1e-6


def mhelm_family(beta: float) -> Family:
    def kappa(lam):
        return np.sqrt(lam * lam + beta * beta)

    def A(lam):
        return (1.0 / (4 * np.pi * kappa(lam)))[:, None, None].astype(complex)

    return Family(kappa, A, beta=beta)


def laplace_family() -> Family:
    def A(lam):
        return (1.0 / (4 * np.pi * np.abs(lam)))[:, None, None].astype(complex)

    return Family(np.abs, A, unscreened=True)


def _direction(value) -> Direction:
    return value if isinstance(value, Direction) else Direction(str(value).lower())


def _scalar_setup(pde, beta):
    pde = PDE.parse(pde)
    if pde is PDE.POISSON:
        return pde, 0.0, laplace_family()
    if pde is PDE.MOD_HELMHOLTZ:
        if not beta > 0:
            raise MissingBeta("modified Helmholtz needs beta > 0; use pde='poisson' for beta = 0")
        return pde, float(beta), mhelm_family(beta)
    raise ValueError(f"{pde.value} is not a scalar PDE")


def _laplace_poly(cell: UnitCell) -> tuple:
    return (PolyTerm(1, 1, np.array([[-1.0 / (2 * cell.d * cell.eta)]], dtype=complex)),)


def build_vertical(pde, beta: float, cell: UnitCell, eps: float, direction) -> PlaneWaveFactorization:
    """South (n <= -2) or north (n >= 2) part of the doubly periodic sum."""
    if not cell.doubly:
        raise NotDoubly("south/north parts exist only for doubly periodic cells")
    pde, beta, fam = _scalar_setup(pde, beta)
    direction = _direction(direction)
    M = truncation_order(cell, eps)
    poly = _laplace_poly(cell) if pde is PDE.POISSON else ()
    part = build_vertical_from_families([fam], cell, M, direction, poly)
    return _mark_neutral(part, pde, beta)


def build_horizontal(pde, beta: float, cell: UnitCell, eps: float, direction,
                     rule: QuadratureRule | None = None) -> PlaneWaveFactorization:
    """West or east part: image columns |m| >= m0 + 1."""
    pde, beta, fam = _scalar_setup(pde, beta)
    direction = _direction(direction)
    if rule is None:
        rule = sommerfeld_rule(pde.value, beta, cell, eps)
    elif not rule.matches(beta, cell, eps):
        raise RuleMismatch("quadrature rule was built for different parameters")
    part = build_horizontal_from_families([fam], [rule], cell, direction)
    return _mark_neutral(part, pde, beta)


def _mark_neutral(part, pde, beta):
    from dataclasses import replace

    if pde is PDE.POISSON or beta < SMALL_BETA:
        return replace(part, neutral=True)
    return part


def _resolve_cell(cell: UnitCell, periodicity) -> UnitCell:
    if periodicity is None:
        return cell
    periodicity = Periodicity.parse(periodicity)
    if periodicity is cell.periodicity:
        return cell
    return make_unit_cell(cell.d, cell.xi, cell.eta, periodicity)


def assemble(pde, beta: float, cell: UnitCell, periodicity=None, eps: float = 1e-12) -> Periodizer:
    """Far-field operator for charges: two parts (singly) or four (doubly)."""
    cell = _resolve_cell(cell, periodicity)
    pde, beta, _ = _scalar_setup(pde, beta)
    rule = sommerfeld_rule(pde.value, beta, cell, eps)
    parts = [build_horizontal(pde, beta, cell, eps, d, rule) for d in (Direction.WEST, Direction.EAST)]
    if cell.doubly:
        parts += [build_vertical(pde, beta, cell, eps, d) for d in (Direction.SOUTH, Direction.NORTH)]
    kernel = Kernel("laplace") if pde is PDE.POISSON else Kernel("mhelm", beta)
    neutral = pde is PDE.POISSON or beta < SMALL_BETA
    return Periodizer(kernel, beta, cell, eps, parts, requires_neutrality=neutral,
                      gauge=pde is PDE.POISSON, label=pde.value)
