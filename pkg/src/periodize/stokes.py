"""Periodizers for the Stokes and modified Stokes equations: velocity,
pressure and the double-layer (stresslet) kernel."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .cell import UnitCell
from .errors import MissingBeta, NonUnitNormal, NotDoubly, RuleMismatch
from .factorization import (
    Direction,
    Family,
    Periodizer,
    PlaneWaveFactorization,
    PolyTerm,
    build_horizontal_from_families,
    build_vertical_from_families,
    combine,
    source_derivative,
    truncation_order,
)
from .kernels import PDE, Kernel
from .quadrature import QuadratureRule, sommerfeld_rule
from .scalar import _direction, _laplace_poly, _resolve_cell, laplace_family

__all__ = [
    "build_mstokes_vertical", "build_mstokes_horizontal", "build_stokes_vertical",
    "build_stokes_horizontal", "assemble_velocity", "build_pressure_periodizer",
    "build_stresslet_periodizer",
]

_I2 = np.eye(2)


def mstokes_families(beta: float) -> list[Family]:
    """The screened pole family (decay chi) and the unscreened one (|lam|)."""
    b2 = beta * beta

    def chi(lam):
        return np.sqrt(lam * lam + b2)

    def a_screened(lam):
        c = chi(lam)
        out = np.empty(lam.shape + (2, 2), dtype=complex)
        out[:, 0, 0] = -lam * lam
        out[:, 0, 1] = out[:, 1, 0] = 1j * lam * c
        out[:, 1, 1] = c * c
        return out / (4 * np.pi * b2 * c)[:, None, None]

    def a_free(lam):
        a = np.abs(lam)
        out = np.empty(lam.shape + (2, 2), dtype=complex)
        out[:, 0, 0] = a
        out[:, 0, 1] = out[:, 1, 0] = -1j * lam
        out[:, 1, 1] = -a
        return out / (4 * np.pi * b2)

    return [
        Family(chi, a_screened, rot_out=True, rot_in=True, beta=beta),
        Family(np.abs, a_free, rot_out=True, rot_in=True, unscreened=True),
    ]


def stokes_family() -> Family:
    def A(lam):
        return (1.0 / (8 * np.pi * np.abs(lam)))[:, None, None] * _I2.astype(complex)

    def B(lam):
        sg = np.sign(lam)
        out = np.empty(lam.shape + (2, 2), dtype=complex)
        out[:, 0, 0] = -1.0
        out[:, 0, 1] = out[:, 1, 0] = 1j * sg
        out[:, 1, 1] = 1.0
        return -out / (8 * np.pi)

    return Family(np.abs, A, B, rot_out=True, rot_in=True, unscreened=True)


def _stokes_poly(cell: UnitCell) -> tuple:
    mat = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex) * (-1.0 / (2 * cell.d * cell.eta))
    return (PolyTerm(1, 1, mat),)


def _require_doubly(cell):
    if not cell.doubly:
        raise NotDoubly("south/north parts exist only for doubly periodic cells")


def _require_beta(beta):
    if not beta > 0:
        raise MissingBeta("modified Stokes needs beta > 0; use pde='stokes' for beta = 0")


def _check_rule(rule, beta, cell, eps, name):
    if rule is None:
        return sommerfeld_rule(name, beta, cell, eps)
    if not rule.matches(beta, cell, eps):
        raise RuleMismatch("quadrature rule was built for different parameters")
    return rule


def build_mstokes_vertical(beta: float, cell: UnitCell, eps: float, direction) -> PlaneWaveFactorization:
    _require_doubly(cell)
    _require_beta(beta)
    M = truncation_order(cell, eps)
    return build_vertical_from_families(mstokes_families(beta), cell, M, _direction(direction))


def build_mstokes_horizontal(beta: float, cell: UnitCell, eps: float, direction,
                             rule_beta: QuadratureRule | None = None,
                             rule_zero: QuadratureRule | None = None) -> PlaneWaveFactorization:
    _require_beta(beta)
    rule_beta = _check_rule(rule_beta, beta, cell, eps, "mstokes")
    rule_zero = _check_rule(rule_zero, 0.0, cell, eps, "stokes")
    return build_horizontal_from_families(mstokes_families(beta), [rule_beta, rule_zero],
                                          cell, _direction(direction))


def build_stokes_vertical(cell: UnitCell, eps: float, direction) -> PlaneWaveFactorization:
    _require_doubly(cell)
    M = truncation_order(cell, eps)
    part = build_vertical_from_families([stokes_family()], cell, M, _direction(direction),
                                        _stokes_poly(cell))
    return replace(part, neutral=True)


def build_stokes_horizontal(cell: UnitCell, eps: float, direction,
                            rule: QuadratureRule | None = None) -> PlaneWaveFactorization:
    rule = _check_rule(rule, 0.0, cell, eps, "stokes")
    part = build_horizontal_from_families([stokes_family()], [rule], cell, _direction(direction))
    return replace(part, neutral=True)


def _directions(cell):
    out = [Direction.WEST, Direction.EAST]
    if cell.doubly:
        out += [Direction.SOUTH, Direction.NORTH]
    return out


def assemble_velocity(pde, beta: float, cell: UnitCell, periodicity=None, eps: float = 1e-6) -> Periodizer:
    """Far-field velocity operator for point forces."""
    cell = _resolve_cell(cell, periodicity)
    pde = PDE.parse(pde)
    parts = []
    if pde is PDE.STOKES:
        rule = sommerfeld_rule("stokes", 0.0, cell, eps)
        for d in _directions(cell):
            parts.append(build_stokes_horizontal(cell, eps, d, rule) if not d.vertical
                         else build_stokes_vertical(cell, eps, d))
        return Periodizer(Kernel("stokes"), 0.0, cell, eps, parts, requires_neutrality=True,
                          gauge=True, label="stokes")
    if pde is PDE.MOD_STOKES:
        _require_beta(beta)
        rb = sommerfeld_rule("mstokes", beta, cell, eps)
        r0 = sommerfeld_rule("stokes", 0.0, cell, eps)
        for d in _directions(cell):
            parts.append(build_mstokes_horizontal(beta, cell, eps, d, rb, r0) if not d.vertical
                         else build_mstokes_vertical(beta, cell, eps, d))
        return Periodizer(Kernel("mstokes", beta), beta, cell, eps, parts, label="mstokes")
    raise ValueError(f"{pde.value} is not a Stokes-type PDE")


# ---------------------------------------------------------------------------
# pressure: p(t) = sum_j grad_s G_L(t - s_j) . f_j


def _laplace_parts(cell, eps):
    from .scalar import build_horizontal, build_vertical

    rule = sommerfeld_rule("poisson", 0.0, cell, eps)
    return [build_horizontal("poisson", 0.0, cell, eps, d, rule) if not d.vertical
            else build_vertical("poisson", 0.0, cell, eps, d) for d in _directions(cell)]


def _column(j: int, width: int):
    def fn(block):
        if block is None:
            return None
        out = np.zeros(block.shape[:-1] + (width,), dtype=complex)
        out[..., j] = block[..., 0]
        return out
    return fn


def pressure_part(lap: PlaneWaveFactorization) -> PlaneWaveFactorization:
    dx, dy = source_derivative(lap, 0), source_derivative(lap, 1)
    return combine([(dx, _column(0, 2)), (dy, _column(1, 2))])


def build_pressure_periodizer(pde, cell: UnitCell, eps: float = 1e-6, periodicity=None) -> Periodizer:
    """Far-field pressure for point forces; identical for Stokes and modified Stokes."""
    cell = _resolve_cell(cell, periodicity)
    PDE.parse(pde)
    parts = [pressure_part(p) for p in _laplace_parts(cell, eps)]
    return Periodizer(Kernel("pressure"), 0.0, cell, eps, parts, requires_neutrality=True,
                      gauge=True, label="pressure")


# ---------------------------------------------------------------------------
# stresslet: W_{i,(jk)} = p_i d_jk + dG_ji/ds_k + dG_ki/ds_j = r_i r_j r_k / (pi r^4)


def stresslet_part(stokes: PlaneWaveFactorization, lap: PlaneWaveFactorization) -> PlaneWaveFactorization:
    """Combine derivatives of the Stokeslet and Laplace parts (same modes).

    Output index i, input index 2 j + k for the density phi_j n_k.
    """
    dG = [source_derivative(stokes, a) for a in (0, 1)]
    dL = [source_derivative(lap, a) for a in (0, 1)]
    terms = []
    for j in range(2):
        for k in range(2):
            col = 2 * j + k

            def from_stokes(block, jj=j, c=col):
                # dG_{i jj}/ds_k for all i, placed in column c
                if block is None:
                    return None
                out = np.zeros(block.shape[:-1] + (4,), dtype=complex)
                out[..., c] = block[..., jj]
                return out

            terms.append((dG[k], from_stokes))
            terms.append((dG[j], lambda b, kk=k, c=col: from_stokes(b, kk, c)))
            if j == k:
                for i in range(2):
                    def from_lap(block, ii=i, c=col):
                        if block is None:
                            return None
                        out = np.zeros(block.shape[:-2] + (2, 4), dtype=complex)
                        out[..., ii, c] = block[..., 0, 0]
                        return out

                    terms.append((dL[i], from_lap))
    part = combine(terms)
    return replace(part, neutral=False)


def build_stresslet_periodizer(cell: UnitCell, eps: float = 1e-6, periodicity=None,
                               normals=None) -> Periodizer:
    """Far-field Stokes double-layer operator for densities phi at sources
    with unit normals ``normals`` (one per source)."""
    cell = _resolve_cell(cell, periodicity)
    n = np.asarray(normals, dtype=float).reshape(-1, 2)
    if n.size and np.any(np.abs(np.hypot(n[:, 0], n[:, 1]) - 1.0) > 1e-10):
        raise NonUnitNormal("stresslet normals must have unit length")
    rule = sommerfeld_rule("stokes", 0.0, cell, eps)
    lap = _laplace_parts(cell, eps)
    parts = []
    for d, lp in zip(_directions(cell), lap):
        st = (build_stokes_horizontal(cell, eps, d, rule) if not d.vertical
              else build_stokes_vertical(cell, eps, d))
        parts.append(stresslet_part(st, lp))
    return Periodizer(Kernel("stresslet"), 0.0, cell, eps, parts, gauge=True,
                      normals=n, label="stresslet")
