"""Periodizers for multipole sources of order l.

Modified Helmholtz: ``K_l(beta r) e^{i l theta} = beta^{-l} (d_x' + i d_y')^l K_0``.
Laplace: ``1/(z - z')^l = 4 pi / ((l-1)! 2^l) (d_x' - i d_y')^l G_L``.
Both are source derivatives of the charge kernels, so each plane wave
only picks up a polynomial factor in its wavevector.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .cell import UnitCell
from .errors import InvalidOrder, MissingBeta
from .factorization import (
    Direction,
    Periodizer,
    PlaneWaveFactorization,
    build_horizontal_from_families,
    build_vertical_from_families,
    combine,
    drop_zero_modes,
    source_derivative,
    truncation_order,
)
from .kernels import PDE, make_multipole_kernel
from .quadrature import sommerfeld_rule, truncation_length
from .scalar import _laplace_poly, _resolve_cell, laplace_family, mhelm_family

MAX_ORDER = 40


def _derivative_operator(part: PlaneWaveFactorization, cy: complex, scale: complex,
                         times: int) -> PlaneWaveFactorization:
    """``scale * (d_x' + cy d_y')^times`` applied to the kernel of ``part``."""
    if times == 0:
        return replace(part, coef=scale * part.coef, take_real_part=False,
                       poly=tuple(replace(t, matrix=scale * t.matrix) for t in part.poly))
    first = combine([(source_derivative(part, 0), lambda b: b),
                     (source_derivative(part, 1), lambda b: None if b is None else cy * b)],
                    take_real_part=False)
    k = part.wavevectors
    factor = (-(k[:, 0] + cy * k[:, 1])) ** (times - 1) * scale
    poly = tuple(replace(t, matrix=scale * t.matrix) for t in first.poly if times == 1)
    return replace(first, coef=first.coef * factor[:, None, None], poly=poly)


def multipole_truncation(pde: PDE, l: int, beta: float, cell: UnitCell, eps: float) -> int:
    """Vertical order widened for the growth of the order-l mode factors."""
    M = truncation_order(cell, eps)
    rate = 2 * math.pi * cell.eta / cell.d
    if pde is PDE.MOD_HELMHOLTZ:
        a = 2 * math.pi * M / cell.d
        growth = l * math.log(max(1.0, (math.hypot(a, beta) + a) / beta))
        return M + math.ceil(growth / rate)
    Ml = M
    for _ in range(20):
        a = 2 * math.pi * Ml * cell.eta
        growth = max(0.0, (l - 1) * math.log(max(a, 1.0)) - math.lgamma(l))
        nxt = M + math.ceil(growth / rate)
        if nxt == Ml:
            break
        Ml = nxt
    return Ml


def _rule_extra(pde: PDE, l: int, beta: float, cell: UnitCell, eps: float) -> float:
    extra = 0.0
    for _ in range(5):
        L = truncation_length(beta, cell, eps, extra)
        if L == 0.0:
            return extra
        if pde is PDE.MOD_HELMHOLTZ:
            extra = l * math.log(max(1.0, (math.hypot(L, beta) + L) / beta))
        else:
            extra = max(0.0, l * math.log(2 * L * cell.d) - math.lgamma(l))
    return extra


def build_multipole_periodizer(pde, l: int, beta: float, cell: UnitCell, eps: float = 1e-12,
                               periodicity=None) -> Periodizer:
    pde = PDE.parse(pde)
    cell = _resolve_cell(cell, periodicity)
    kernel = make_multipole_kernel(pde, l, beta)
    if l > MAX_ORDER:
        raise InvalidOrder(f"multipole order {l} exceeds {MAX_ORDER}")
    if pde is PDE.MOD_HELMHOLTZ:
        if not beta > 0:
            raise MissingBeta("modified Helmholtz multipoles need beta > 0")
        fam, cy, scale, poly = mhelm_family(beta), 1j, 2 * math.pi / beta**l, ()
    else:
        beta = 0.0
        fam, cy = laplace_family(), -1j
        scale = 4 * math.pi / (math.factorial(l - 1) * 2**l)
        poly = _laplace_poly(cell)
    extra = _rule_extra(pde, l, beta, cell, eps)
    rule = sommerfeld_rule(pde.value, beta, cell, eps, extra)
    parts = []
    for d in (Direction.WEST, Direction.EAST):
        base = build_horizontal_from_families([fam], [rule], cell, d, fold=False)
        parts.append(base)
    if cell.doubly:
        M = multipole_truncation(pde, l, beta, cell, eps)
        for d in (Direction.SOUTH, Direction.NORTH):
            parts.append(build_vertical_from_families([fam], cell, M, d, poly, real=False))
    neutral = pde is PDE.POISSON and l == 1
    out = []
    for p in parts:
        q = _derivative_operator(p, cy, scale, l)
        out.append(drop_zero_modes(replace(q, neutral=neutral)))
    return Periodizer(kernel, beta, cell, eps, out, requires_neutrality=neutral,
                      gauge=neutral, label=f"{pde.value} multipole l={l}")
