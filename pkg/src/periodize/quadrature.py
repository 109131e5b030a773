"""Gauss-Legendre rules, barycentric interpolation and the composite
quadrature used to discretise the east/west plane-wave integrals."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .cell import UnitCell
from .errors import OrderOutOfRange, OutOfInterval, PrecisionOutOfRange

CACHE_ENV = "PERIODIZE_QUAD_CACHE"

# extra decades of decay beyond ln(1/eps) covering polynomial prefactors
_TRUNCATION_MARGIN = math.log(1e3)


@dataclass(frozen=True)
class GaussRule:
    nodes: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int) -> GaussRule:
    if not 1 <= n <= 64:
        raise OrderOutOfRange(f"Gauss-Legendre order {n} outside [1, 64]")
    x, w = _leggauss(int(n))
    return GaussRule(x, w)


def _panel_rule(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _leggauss(n)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x).ravel()
    weights = (half * w).ravel()
    return nodes, weights


# ---------------------------------------------------------------------------
# Sommerfeld rules


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights on (0, L] for the east/west plane-wave integrals."""

    lambdas: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def count(self) -> int:
        return int(self.lambdas.size)

    def matches(self, beta: float, cell: UnitCell, eps: float) -> bool:
        m = self.meta
        return (
            math.isclose(m.get("beta", -1.0), beta, rel_tol=1e-12, abs_tol=0.0)
            and math.isclose(m.get("d", -1.0), cell.d, rel_tol=1e-12)
            and math.isclose(m.get("eta", -1.0), cell.eta, rel_tol=1e-12)
            and m.get("m0") == cell.m0
            and m.get("doubly") == cell.doubly
            and math.isclose(m.get("eps", -1.0), eps, rel_tol=1e-12)
        )


def rule_ranges(cell: UnitCell) -> tuple[float, float, float]:
    """(x_min, x_max, y_osc) covered by the east/west integrands."""
    x_min = cell.d
    x_max = (2 * cell.m0 + 1) * cell.d
    y_osc = 2.0 * cell.eta if cell.doubly else cell.eta
    return x_min, x_max, y_osc


def _panel_edges(length: float, width: float, floor: float) -> np.ndarray:
    """Uniform panels of ``width`` on [0, length]; first panel split
    dyadically toward zero until its left piece is no wider than ``floor``."""
    first = min(width, length)
    levels = max(0, math.ceil(math.log2(first / floor))) if floor < first else 0
    dyadic = [0.0] + [first * 2.0 ** (-k) for k in range(levels, 0, -1)] + [first]
    tail = list(np.arange(first + width, length, width))
    if length > first:
        tail.append(length)
    edges = np.array(sorted(set(dyadic + tail)))
    return edges


def _certify(edges, n, beta, x_min, x_max, y_osc, eps) -> bool:
    lam1, w1 = _panel_rule(edges, n)
    lam2, w2 = _panel_rule(edges, min(2 * n, 64))
    xs = np.array([x_min, 0.5 * (x_min + x_max), x_max])
    ys = np.array([0.0, 0.5 * y_osc, y_osc])

    def integrands(lam):
        chi = np.sqrt(lam * lam + beta * beta)
        base = np.exp(-chi[None, None, :] * xs[:, None, None]
                      + 1j * lam[None, None, :] * ys[None, :, None])
        weights = [np.ones_like(lam), lam / (1.0 + lam)]
        if beta > 0:
            weights.append(1.0 / chi)
        return np.stack([base * w for w in weights])

    f1 = integrands(lam1) @ w1
    f2 = integrands(lam2) @ w2
    scale = np.abs(integrands(lam2)) @ w2
    return bool(np.all(np.abs(f1 - f2) <= eps * np.maximum(scale, 1e-300)))


def _build_scaled(beta_hat: float, eta_hat: float, m0: int, doubly: bool, eps: float,
                  extra: float = 0.0):
    """Rule for a cell with d = 1 (beta and eta given in units of d).

    ``extra`` adds decades (natural log) to the truncation point for
    integrands whose weights grow polynomially in lambda.
    """
    x_min, x_max = 1.0, 2.0 * m0 + 1.0
    y_osc = 2.0 * eta_hat if doubly else eta_hat
    log_eps = math.log(1.0 / eps) + _TRUNCATION_MARGIN + extra
    if log_eps <= beta_hat * x_min:
        return np.empty(0), np.empty(0)
    length = math.sqrt(log_eps**2 - (beta_hat * x_min) ** 2) / x_min
    n = 16 if eps <= 1e-9 else 10
    width = 2 * math.pi / y_osc
    floor = beta_hat if beta_hat > 0 else eps * min(width, length)
    for _ in range(8):
        edges = _panel_edges(length, width, floor)
        if _certify(edges, n, beta_hat, x_min, x_max, y_osc, eps / 10):
            return _panel_rule(edges, n)
        width *= 0.5
    raise RuntimeError("quadrature certification failed")  # pragma: no cover


def _cache_path(key: str) -> Path | None:
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    return Path(root) / f"rule_{key}.txt"


def _load(path: Path):
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.size == 0:
        return np.empty(0), np.empty(0)
    return data[:, 0].copy(), data[:, 1].copy()


def truncation_length(beta: float, cell: UnitCell, eps: float, extra: float = 0.0) -> float:
    """Upper end L of the rule (0 when the integrals are negligible)."""
    log_eps = math.log(1.0 / eps) + _TRUNCATION_MARGIN + extra
    b = beta * cell.d
    if log_eps <= b:
        return 0.0
    return math.sqrt(log_eps**2 - b * b) / cell.d


def sommerfeld_rule(pde, beta: float, cell: UnitCell, eps: float,
                    extra: float = 0.0) -> QuadratureRule:
    """Composite Gauss rule on (0, L] for the east/west integrals.

    ``beta = 0`` gives the rule for the unscreened (Poisson, Stokes) family.
    ``extra`` lengthens the rule for weights growing like a power of lambda.
    """
    if not 1e-13 <= eps <= 1e-3:
        raise PrecisionOutOfRange(f"eps={eps} outside [1e-13, 1e-3]")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    d = cell.d
    key_vals = (beta * d, cell.eta / d, cell.m0, int(cell.doubly), eps, extra)
    key = "_".join(f"{v:.15g}" for v in key_vals)
    path = _cache_path(key)
    if path is not None and path.exists():
        lam, w = _load(path)
    else:
        lam, w = _build_scaled(beta * d, cell.eta / d, cell.m0, cell.doubly, eps, extra)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            header = "lambda weight (d = 1); beta*d eta/d m0 doubly eps = " + key
            np.savetxt(path, np.column_stack([lam, w]), header=header, fmt="%.17e")
    meta = {
        "pde": str(pde), "beta": float(beta), "d": d, "eta": cell.eta,
        "xi": cell.xi, "m0": cell.m0, "doubly": cell.doubly, "eps": eps,
        "extra": extra,
    }
    return QuadratureRule(lam / d, w / d, meta)


# ---------------------------------------------------------------------------
# barycentric interpolation


@dataclass(frozen=True)
class BarycentricGrid:
    nodes: np.ndarray
    sigma: np.ndarray
    center: float
    halfwidth: float

    @property
    def count(self) -> int:
        return int(self.nodes.size)


def barycentric_grid(count: int, halfwidth: float, center: float = 0.0) -> BarycentricGrid:
    if not 2 <= count <= 64:
        raise OrderOutOfRange(f"grid size {count} outside [2, 64]")
    x, _ = _leggauss(count)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # weights on [-1, 1]; any common scale cancels in the second form
    sigma = 1.0 / np.prod(diff, axis=1)
    sigma = sigma / np.max(np.abs(sigma))
    return BarycentricGrid(center + halfwidth * x, sigma, center, halfwidth)


def interp_matrix(ts, grid: BarycentricGrid, check: bool = True) -> np.ndarray:
    """Rows of interpolation coefficients gamma(t, .) for each t."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if check:
        tol = 1e-12 * grid.halfwidth
        if np.any(np.abs(ts - grid.center) > grid.halfwidth + tol):
            raise OutOfInterval("interpolation point outside the grid interval")
    diff = ts[:, None] - grid.nodes[None, :]
    hit = diff == 0.0
    diff[hit] = 1.0
    terms = grid.sigma[None, :] / diff
    out = terms / terms.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    if rows.any():
        out[rows] = hit[rows].astype(float)
    return out


def interp_coeffs(t: float, grid: BarycentricGrid) -> np.ndarray:
    return interp_matrix([t], grid)[0]
