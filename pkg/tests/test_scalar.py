import math

import numpy as np
import pytest

from periodize import (
    MissingBeta,
    NotDoubly,
    NotNeutral,
    RuleMismatch,
    assemble,
    cell_from_aspect,
    make_unit_cell,
    total_field,
)
from periodize.apply import apply_direct
from periodize.factorization import Direction, tail_bound, truncation_order
from periodize.kernels import Kernel
from periodize.oracle import periodicity_residual
from periodize.quadrature import sommerfeld_rule
from periodize.scalar import build_horizontal, build_vertical

from conftest import diffs, make_system, rel


def images(kernel, cell, S, q, T, mn):
    """Plain double loop over the listed lattice images."""
    out = np.zeros(T.shape[0])
    for m, n in mn:
        shift = m * cell.e1 + n * cell.e2
        dx = T[:, None, 0] - S[None, :, 0] - shift[0]
        dy = T[:, None, 1] - S[None, :, 1] - shift[1]
        out += kernel.block(dx, dy)[..., 0, 0] @ q
    return out


# ---------------------------------------------------------------------------
# truncation order


@pytest.mark.parametrize("d,eta,M", [(1.0, 1.0, 5), (10.0, 1.0, 46)])
def test_truncation_order_examples(d, eta, M):
    c = make_unit_cell(d, 0.0, eta)
    assert truncation_order(c, 1e-12) == M
    assert tail_bound(c, M) <= 1e-12


def test_truncation_order_grows_slightly_faster_than_aspect():
    a = truncation_order(cell_from_aspect(50), 1e-10)
    b = truncation_order(cell_from_aspect(100), 1e-10)
    assert 2 * a - 1 <= b <= 2 * a + 50


# ---------------------------------------------------------------------------
# vertical parts


def test_zero_charges_give_zero(rng):
    c = make_unit_cell(1, 0, 1)
    part = build_vertical("mhelm", 1.0, c, 1e-12, Direction.SOUTH)
    S, T = rng.uniform(-0.5, 0.5, (10, 2)), rng.uniform(-0.5, 0.5, (5, 2))
    assert np.all(apply_direct(part, np.zeros(10), S, T) == 0)


@pytest.mark.parametrize("direction,rows", [(Direction.SOUTH, range(-60, -1)),
                                            (Direction.NORTH, range(2, 61))])
def test_mhelm_vertical_matches_truncated_lattice(rng, direction, rows):
    c = make_unit_cell(1, 0, 1)
    part = build_vertical("mhelm", 1.0, c, 1e-12, direction)
    S = rng.uniform(-0.5, 0.5, (30, 2))
    q = rng.standard_normal(30)
    T = rng.uniform(-0.5, 0.5, (20, 2))
    ref = images(Kernel("mhelm", 1.0), c, S, q, T, [(m, n) for n in rows for m in range(-60, 61)])
    got = apply_direct(part, q, S, T)[:, 0]
    assert rel(got, ref) <= 1e-12


def test_north_diag_conjugates_south():
    c = make_unit_cell(1.0, 0.3, 0.9)
    s = build_vertical("mhelm", 1.0, c, 1e-12, Direction.SOUTH)
    n = build_vertical("mhelm", 1.0, c, 1e-12, Direction.NORTH)
    # north is the mirror image of south: same rank and diagonal magnitudes
    assert s.rank == n.rank
    assert np.allclose(np.sort(np.abs(s.diag.ravel())), np.sort(np.abs(n.diag.ravel())), rtol=1e-12)


def test_vertical_diag_decay():
    c = cell_from_aspect(4.0)
    part = build_vertical("mhelm", 1.0, c, 1e-12, Direction.SOUTH)
    mag = np.abs(part.diag.ravel())
    for i, m in enumerate(part.modes):
        for j, mp in enumerate(part.modes):
            if abs(m) > abs(mp) + c.aspect:
                assert mag[i] <= 10 * mag[j]


def test_poisson_vertical_has_special_zero_mode():
    c = make_unit_cell(1, 0, 1)
    p = build_vertical("poisson", 0.0, c, 1e-9, Direction.SOUTH)
    assert 0 not in p.modes.tolist()
    assert len(p.poly) == 1 and p.poly[0].matrix[0, 0] == pytest.approx(-1 / (2 * c.d * c.eta))
    m = build_vertical("mhelm", 1.0, c, 1e-12, Direction.SOUTH)
    assert 0 in m.modes.tolist() and not m.poly


def test_vertical_needs_doubly():
    with pytest.raises(NotDoubly):
        build_vertical("mhelm", 1.0, make_unit_cell(1, 0, 1, "singly"), 1e-12, Direction.SOUTH)


def test_poisson_dipole_matches_small_beta():
    c = make_unit_cell(1, 0, 1)
    S = np.array([[0.0, 0.1], [0.0, -0.1]])
    q = np.array([1.0, -1.0])
    T = np.random.default_rng(5).uniform(-0.5, 0.5, (20, 2))
    lap = assemble("poisson", 0.0, c, eps=1e-12).apply(S, q, T)
    mh = assemble("mhelm", 1e-6, c, eps=1e-12).apply(S, q, T)
    assert np.max(np.abs(diffs(lap) - diffs(mh))) <= 1e-5


# ---------------------------------------------------------------------------
# horizontal parts


def test_singly_horizontal_matches_row_sum(rng):
    c = make_unit_cell(1, 0, 1, "singly")
    per = assemble("mhelm", 1.0, c, eps=1e-12)
    S = rng.uniform(-0.5, 0.5, (30, 2))
    q = rng.standard_normal(30)
    T = rng.uniform(-0.5, 0.5, (20, 2))
    ref = images(Kernel("mhelm", 1.0), c, S, q, T, [(m, 0) for m in range(-200, 201) if abs(m) >= 2])
    assert rel(per.apply(S, q, T), ref) <= 1e-12


def test_west_east_reflection(rng):
    c = make_unit_cell(1, 0, 1, "singly")
    r = sommerfeld_rule("mhelm", 1.0, c, 1e-12)
    west = build_horizontal("mhelm", 1.0, c, 1e-12, Direction.WEST, r)
    east = build_horizontal("mhelm", 1.0, c, 1e-12, Direction.EAST, r)
    t, s = rng.uniform(-0.5, 0.5, (1, 2)), rng.uniform(-0.5, 0.5, (1, 2))
    a = apply_direct(west, [1.0], s, t)[0, 0]
    b = apply_direct(east, [1.0], t, s)[0, 0]
    assert abs(a - b) <= 1e-14 * abs(a)


def test_empty_rule_gives_zero_operator(rng):
    c = make_unit_cell(1, 0, 1, "singly")
    per = assemble("mhelm", 60.0, c, eps=1e-12)
    assert all(p.rank == 0 for p in per.parts)
    S = rng.uniform(-0.5, 0.5, (4, 2))
    assert np.all(per.apply(S, np.ones(4), S) == 0)


def test_rule_mismatch():
    c = make_unit_cell(1, 0, 1)
    with pytest.raises(RuleMismatch):
        build_horizontal("mhelm", 1.0, c, 1e-12, Direction.WEST,
                         sommerfeld_rule("mhelm", 2.0, c, 1e-12))


# ---------------------------------------------------------------------------
# assembly


def test_part_counts():
    assert len(assemble("mhelm", 1.0, make_unit_cell(1, 0, 1, "singly")).parts) == 2
    parts = assemble("mhelm", 1.0, make_unit_cell(1, 0, 1)).parts
    assert {p.direction for p in parts} == set(Direction)


def test_beta_zero_mhelm_is_rejected():
    with pytest.raises(MissingBeta, match="poisson"):
        assemble("mhelm", 0.0, make_unit_cell(1, 0, 1))


def test_poisson_requires_neutrality(rng):
    per = assemble("poisson", 0.0, make_unit_cell(1, 0, 1), eps=1e-9)
    S = rng.uniform(-0.5, 0.5, (5, 2))
    with pytest.raises(NotNeutral):
        per.apply(S, np.ones(5), S)


def test_empty_systems():
    per = assemble("poisson", 0.0, make_unit_cell(1, 0, 1), eps=1e-9)
    assert per.apply(np.zeros((0, 2)), np.zeros(0), np.zeros((4, 2))).tolist() == [0.0] * 4
    assert per.apply(np.zeros((2, 2)), np.array([1.0, -1.0]), np.zeros((0, 2))).shape == (0,)


@pytest.mark.parametrize("pde,beta,eps", [("mhelm", 1.0, 1e-12), ("poisson", 0.0, 1e-9)])
@pytest.mark.parametrize("periodicity", ["singly", "doubly"])
def test_square_cell_periodicity(rng, pde, beta, eps, periodicity):
    c = make_unit_cell(1, 0, 1, periodicity)
    per = assemble(pde, beta, c, eps=eps)
    sys_ = make_system(c, 300, 0, rng, neutral=True)
    field = lambda T: total_field(per, type(sys_)(sys_.sources, sys_.strengths, T)).values
    rep = periodicity_residual(field, c, samples=100, gauge=per.gauge)
    assert rep.gate <= 5 * eps


def _laplacian_residual(f, t, h, beta):
    u0 = f(t)
    lap = sum(f(t + h * e) + f(t - h * e) for e in np.eye(2)) - 4 * u0
    return np.abs(lap / h**2 - beta**2 * u0), np.abs(u0)


@pytest.mark.parametrize("pde,beta", [("mhelm", 1.0), ("poisson", 0.0)])
def test_each_part_satisfies_pde(rng, pde, beta):
    c = make_unit_cell(1, 0, 1)
    per = assemble(pde, beta, c, eps=1e-12)
    S = rng.uniform(-0.5, 0.5, (20, 2))
    q = rng.standard_normal(20)
    q -= q.mean()
    h = 1e-4 * min(c.d, c.eta)
    T = rng.uniform(-0.4, 0.4, (5, 2))
    for part in per.parts:
        f = lambda t: apply_direct(part, q, S, t)[:, 0]
        res, u0 = _laplacian_residual(f, T, h, beta)
        # second differences lose ~8 digits; scale by the field size
        assert np.max(res) <= 1e-5 * np.max(u0)
