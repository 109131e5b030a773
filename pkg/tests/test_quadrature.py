import math

import numpy as np
import pytest
from scipy import integrate

from periodize import OrderOutOfRange, OutOfInterval, PrecisionOutOfRange, make_unit_cell
from periodize.quadrature import (
    barycentric_grid,
    gauss_legendre,
    interp_coeffs,
    interp_matrix,
    sommerfeld_rule,
)


def test_gauss_small_orders():
    g1 = gauss_legendre(1)
    assert g1.nodes.tolist() == [0.0] and g1.weights.tolist() == [2.0]
    g2 = gauss_legendre(2)
    assert np.allclose(g2.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-16)
    assert np.allclose(g2.weights, [1.0, 1.0], atol=1e-15)


def test_gauss_cosine():
    g = gauss_legendre(16)
    assert abs(g.weights @ np.cos(g.nodes) - 2 * math.sin(1.0)) <= 1e-14


@pytest.mark.parametrize("n", [1, 3, 8, 17, 32])
def test_gauss_invariants(n):
    g = gauss_legendre(n)
    assert abs(g.weights.sum() - 2) <= 1e-13
    assert np.all(np.diff(g.nodes) > 0) and np.all(g.weights > 0)
    for k in range(2 * n):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert abs(g.weights @ g.nodes**k - exact) <= 1e-13


@pytest.mark.parametrize("n", [0, 65])
def test_gauss_order_range(n):
    with pytest.raises(OrderOutOfRange):
        gauss_legendre(n)


def test_rule_precision_range():
    c = make_unit_cell(1, 0, 1)
    for eps in (1e-14, 1e-2):
        with pytest.raises(PrecisionOutOfRange):
            sommerfeld_rule("mhelm", 1.0, c, eps)


def test_large_beta_gives_small_rule():
    c = make_unit_cell(1, 0, 1)
    r = sommerfeld_rule("mhelm", 40.0, c, 1e-12)
    assert r.count <= 64
    # ln(1/eps) <= beta d: the east/west integrals are negligible
    assert sommerfeld_rule("mhelm", 60.0, c, 1e-12).count == 0


@pytest.mark.parametrize("beta", [0.5, 1.0, 5.0])
@pytest.mark.parametrize("periodicity", ["singly", "doubly"])
def test_rule_against_adaptive_integration(beta, periodicity):
    c = make_unit_cell(1.0, 0.0, 1.0, periodicity)
    eps = 1e-12
    r = sommerfeld_rule("mhelm", beta, c, eps)
    assert np.all(np.diff(r.lambdas) > 0) and np.all(r.weights > 0)
    assert r.count == r.lambdas.size == r.weights.size
    for x in (c.d, 2 * c.d, 3 * c.d):
        for y in (0.0, c.eta / 2, c.eta):
            f = lambda lam: math.exp(-lam * x) * math.cos(lam * y) / (lam + beta)
            ref = integrate.quad(f, 0, np.inf, epsabs=1e-15, epsrel=1e-14, limit=500)[0]
            got = r.weights @ (np.exp(-r.lambdas * x) * np.cos(r.lambdas * y) / (r.lambdas + beta))
            assert abs(got - ref) <= eps * max(1.0, abs(ref))


def test_unscreened_rule_handles_linear_vanishing():
    c = make_unit_cell(1.0, 0.0, 1.0, "singly")
    eps = 1e-9
    r = sommerfeld_rule("poisson", 0.0, c, eps)
    for x, y in [(1.0, 0.0), (1.0, 1.0), (3.0, 0.5)]:
        # (1 - cos(lam y')) / lam type weights vanish linearly at 0
        f = lambda lam: math.exp(-lam * x) * math.sin(lam * y + 0.3) * lam / (1 + lam)
        ref = integrate.quad(f, 0, np.inf, epsabs=1e-14, limit=500)[0]
        got = r.weights @ (np.exp(-r.lambdas * x) * np.sin(r.lambdas * y + 0.3)
                           * r.lambdas / (1 + r.lambdas))
        assert abs(got - ref) <= eps


def test_rule_count_growth_with_aspect():
    counts = [sommerfeld_rule("mhelm", 1.0, make_unit_cell(1.0, 0, a, "singly"), 1e-12).count
              for a in (1, 2, 4, 8, 16)]
    for a, b in zip(counts, counts[1:]):
        assert b <= 2 * a + 64


def test_rule_scales_with_d():
    a = sommerfeld_rule("mhelm", 1.0, make_unit_cell(1.0, 0, 1.0, "singly"), 1e-10)
    b = sommerfeld_rule("mhelm", 0.5, make_unit_cell(2.0, 0, 2.0, "singly"), 1e-10)
    assert np.allclose(a.lambdas, 2 * b.lambdas, rtol=1e-14)
    assert np.allclose(a.weights, 2 * b.weights, rtol=1e-14)


def test_rule_cache_roundtrip(tmp_path, monkeypatch):
    monkeypatch.setenv("PERIODIZE_QUAD_CACHE", str(tmp_path))
    c = make_unit_cell(1.0, 0, 2.0, "singly")
    first = sommerfeld_rule("mhelm", 0.7, c, 1e-8)
    assert list(tmp_path.iterdir())
    again = sommerfeld_rule("mhelm", 0.7, c, 1e-8)
    assert np.array_equal(first.lambdas, again.lambdas)
    assert np.array_equal(first.weights, again.weights)


def test_rule_matches_metadata():
    c = make_unit_cell(1.0, 0, 1.0)
    r = sommerfeld_rule("mhelm", 1.0, c, 1e-10)
    assert r.matches(1.0, c, 1e-10)
    assert not r.matches(2.0, c, 1e-10)
    assert not r.matches(1.0, c, 1e-12)


# ---------------------------------------------------------------------------


def test_barycentric_weights_formula():
    g = barycentric_grid(7, 1.0)
    x = g.nodes
    ref = np.array([1 / np.prod([x[i] - x[j] for j in range(7) if j != i]) for i in range(7)])
    # the second barycentric form is invariant under a common scale
    assert np.allclose(g.sigma / g.sigma[0], ref / ref[0], rtol=1e-13)


def test_barycentric_constants_and_polynomials(rng):
    g = barycentric_grid(9, 0.5)
    t = rng.uniform(-0.5, 0.5, 200)
    G = interp_matrix(t, g)
    assert np.allclose(G.sum(axis=1), 1.0, atol=1e-15)
    p = np.polynomial.Polynomial(rng.standard_normal(9))
    assert np.max(np.abs(G @ p(g.nodes) - p(t))) <= 1e-12


def test_barycentric_exponential_16_nodes():
    g = barycentric_grid(16, 0.5)
    t = np.linspace(-0.5, 0.5, 2001)
    assert np.max(np.abs(interp_matrix(t, g) @ np.exp(-g.nodes) - np.exp(-t))) <= 1e-13


def test_interp_coeffs_properties(rng):
    g = barycentric_grid(16, 0.5)
    e = interp_coeffs(g.nodes[3], g)
    assert np.array_equal(e, np.eye(16)[3])
    for t in rng.uniform(-0.5, 0.5, 100):
        assert abs(interp_coeffs(t, g).sum() - 1) <= 1e-14


@pytest.mark.xfail(strict=True, reason="degree-15 best approximation of exp(pi x) on [-1, 1] "
                   "already errs by ~2 I_16(pi) = 1.3e-10")
def test_interp_exponential_two_pi_at_1e12(rng):
    g = barycentric_grid(16, 0.5)
    chi = 2 * math.pi
    t = rng.uniform(-0.5, 0.5, 50)
    assert np.max(np.abs(interp_matrix(t, g) @ np.exp(chi * g.nodes) - np.exp(chi * t))) <= 1e-12


def test_interp_exponential_two_pi_near_best_approximation():
    from scipy.special import iv

    g = barycentric_grid(16, 0.5)
    t = np.linspace(-0.5, 0.5, 4001)
    err = np.max(np.abs(interp_matrix(t, g) @ np.exp(2 * math.pi * g.nodes) - np.exp(2 * math.pi * t)))
    best = 2 * iv(16, math.pi)
    assert best <= err <= 10 * best


def test_interp_errors():
    with pytest.raises(OutOfInterval):
        interp_coeffs(0.51, barycentric_grid(8, 0.5))
    for n in (1, 65):
        with pytest.raises(OrderOutOfRange):
            barycentric_grid(n, 1.0)
