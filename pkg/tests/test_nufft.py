import time

import numpy as np
import pytest

from periodize import LengthMismatch
from periodize.nufft import (
    Backend,
    NdftPlan,
    accelerated_backend,
    dft_matrix,
    fft_reference_time,
    set_threads,
    type1,
    type2,
    type3,
    wrap_phase,
)

needs_accel = pytest.mark.skipif(accelerated_backend() is None, reason="finufft not installed")


def phases(rng, n):
    return rng.uniform(-np.pi, np.pi, n)


def cvec(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def test_single_point_at_origin():
    f = type1(NdftPlan(np.zeros(1), 5), np.ones(1))
    assert np.allclose(f, 1, atol=0, rtol=1e-15)


def test_delta_mode():
    M = 4
    modes = np.zeros(2 * M + 1, dtype=complex)
    modes[M] = 1
    v = type2(NdftPlan(np.linspace(-3, 3, 7), M), modes)
    assert np.allclose(v, 1, atol=0, rtol=1e-15)


def test_equispaced_points_give_dft():
    # x_j = -pi + 2 pi j / n, so f_k = (-1)^k n ifft(c)[k mod n]
    n, M = 16, 7
    x = -np.pi + 2 * np.pi * np.arange(n) / n
    c = cvec(np.random.default_rng(3), n)
    k = np.arange(-M, M + 1)
    ref = (-1.0) ** k * n * np.fft.ifft(c)[k % n]
    assert np.max(np.abs(type1(NdftPlan(x, M), c) - ref)) <= 1e-13 * np.abs(c).sum()


def test_dense_matrix_agrees(rng):
    x, c = phases(rng, 30), cvec(rng, 30)
    assert np.max(np.abs(type1(NdftPlan(x, 9), c) - dft_matrix(x, 9).T @ c)) <= 1e-13 * np.abs(c).sum()


def test_adjoint_identity(rng):
    x, c, f = phases(rng, 40), cvec(rng, 40), cvec(rng, 21)
    plan = NdftPlan(x, 10)
    lhs = np.vdot(f, type1(plan, c))
    rhs = np.vdot(type2(plan, f), c)
    assert abs(lhs - rhs) <= 1e-13 * np.abs(c).sum() * np.abs(f).sum()


def test_linearity(rng):
    x = phases(rng, 25)
    a, b = cvec(rng, 25), cvec(rng, 25)
    plan = NdftPlan(x, 6)
    assert np.allclose(type1(plan, 2 * a - 3j * b), 2 * type1(plan, a) - 3j * type1(plan, b),
                       rtol=0, atol=1e-12)


def test_batched_coefficients(rng):
    x = phases(rng, 20)
    c = cvec(rng, 60).reshape(3, 20)
    plan = NdftPlan(x, 5)
    out = type1(plan, c)
    assert out.shape == (3, 11)
    assert np.allclose(out[1], type1(plan, c[1]), rtol=0, atol=1e-14)


def test_type3_integer_frequencies_reduce_to_type1(rng):
    x, c = phases(rng, 30), cvec(rng, 30)
    M = 8
    assert np.max(np.abs(type3(x, c, np.arange(-M, M + 1)) - type1(NdftPlan(x, M), c))) <= 1e-13 * np.abs(c).sum()


def test_type3_reference_is_direct_sum(rng):
    y = rng.uniform(-3, 3, 7)
    s = rng.uniform(-20, 20, 5)
    c = cvec(rng, 7)
    direct = np.array([np.sum(c * np.exp(1j * sn * y)) for sn in s])
    assert np.max(np.abs(type3(y, c, s) - direct)) <= 1e-13 * np.abs(c).sum()


def test_empty_inputs():
    assert type1(NdftPlan(np.empty(0), 3), np.empty(0)).shape == (7,)
    assert type2(NdftPlan(np.empty(0), 3), np.zeros(7)).shape == (0,)
    assert type3(np.empty(0), np.empty(0), np.arange(3.0)).shape == (3,)


def test_length_mismatch(rng):
    plan = NdftPlan(phases(rng, 5), 2)
    with pytest.raises(LengthMismatch):
        type1(plan, np.ones(4))
    with pytest.raises(LengthMismatch):
        type2(plan, np.ones(4))
    with pytest.raises(LengthMismatch):
        type3(np.zeros(3), np.ones(2), np.ones(2))


@pytest.mark.parametrize("tol", [1e-15, 0.1])
def test_tolerance_range(tol):
    with pytest.raises(ValueError):
        NdftPlan(np.zeros(1), 1, tolerance=tol)


def test_nonfinite_type3():
    with pytest.raises(ValueError):
        type3([np.nan], [1.0], [1.0])


def test_wrap_phase():
    w = wrap_phase([np.pi, -np.pi, 3 * np.pi + 0.5, -7.0])
    assert np.all((w >= -np.pi) & (w < np.pi))
    assert np.allclose(np.exp(1j * w), np.exp(1j * np.array([np.pi, -np.pi, 3 * np.pi + 0.5, -7.0])))


def test_set_threads_validation():
    with pytest.raises(ValueError):
        set_threads(0)
    set_threads(None)


@needs_accel
@pytest.mark.parametrize("eps", [1e-6, 1e-9, 1e-12])
def test_accelerated_type1_and_type2(rng, eps):
    x, c, f = phases(rng, 3), cvec(rng, 3), cvec(rng, 9)
    ref, acc = NdftPlan(x, 4), NdftPlan(x, 4, eps, Backend.ACCELERATED)
    assert np.max(np.abs(type1(acc, c) - type1(ref, c))) <= eps * np.abs(c).sum()
    assert np.max(np.abs(type2(acc, f) - type2(ref, f))) <= eps * np.abs(f).sum()
    x, c, f = phases(rng, 2000), cvec(rng, 2000), cvec(rng, 301)
    ref, acc = NdftPlan(x, 150), NdftPlan(x, 150, eps, Backend.ACCELERATED)
    assert np.max(np.abs(type1(acc, c) - type1(ref, c))) <= eps * np.abs(c).sum()
    assert np.max(np.abs(type2(acc, f) - type2(ref, f))) <= eps * np.abs(f).sum()


@needs_accel
@pytest.mark.parametrize("eps", [1e-6, 1e-12])
def test_accelerated_type3(rng, eps):
    y, c = rng.uniform(-2, 2, 1500), cvec(rng, 1500)
    s = rng.uniform(-80, 80, 400)
    ref = type3(y, c, s)
    acc = type3(y, c, s, eps, Backend.ACCELERATED)
    assert np.max(np.abs(acc - ref)) <= eps * np.abs(c).sum()


@needs_accel
def test_threads_do_not_change_results(rng):
    x, c = phases(rng, 500), cvec(rng, 500)
    plan = NdftPlan(x, 40, 1e-12, Backend.ACCELERATED)
    a = type1(plan, c)
    set_threads(1)
    try:
        b = type1(plan, c)
    finally:
        set_threads(None)
    assert np.max(np.abs(a - b)) <= 1e-12 * np.abs(c).sum()


@needs_accel
def test_complexity_gate():
    rng = np.random.default_rng(0)
    n, M = 10**6, 10**5
    plan = NdftPlan(phases(rng, n), M, 1e-6, Backend.ACCELERATED)
    c = cvec(rng, n)
    type1(plan, c)
    best = np.inf
    for _ in range(3):
        t = time.perf_counter()
        type1(plan, c)
        best = min(best, time.perf_counter() - t)
    fft = min(fft_reference_time(2 * M) for _ in range(5))
    assert best <= 50 * fft, f"type1 {best:.3g}s vs fft {fft:.3g}s"
