import cmath
import itertools
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from randnls.counting import (BudgetExceeded, CountQuery, bilinear_bound, bilinear_level_counts,
                              convolution_count, corpus_csv, count_ball_plane, count_bilinear_level_set,
                              count_sphere, count_sum_of_squares, golden_corpus, indicator_fourier_coeff,
                              loglog_slope, matrix_aat_bound, resonance_set, run_query, sphere_bound,
                              sum_of_squares_table, window_maxima)
from randnls.lattice import block_of

GOLDEN = Path(__file__).parent / "golden" / "counting_corpus.csv"


def brute_r(d, A):
    R = math.isqrt(A)
    return sum(1 for p in itertools.product(range(-R, R + 1), repeat=d) if sum(x * x for x in p) == A)


@pytest.mark.parametrize("d, A, want", [(3, 0, 1), (3, 1, 6), (2, 25, 12), (4, 4, 24), (2, 3, 0), (4, 100, 744)])
def test_sum_of_squares_examples(d, A, want):
    assert count_sum_of_squares(d, A) == want


@pytest.mark.parametrize("d", [2, 3, 4])
def test_sum_of_squares_table_strategies(d):
    A_max = 120
    a = sum_of_squares_table(d, A_max, "enumerate")
    b = sum_of_squares_table(d, A_max, "theta")
    assert np.array_equal(a, b)
    assert [int(x) for x in a[:40]] == [brute_r(d, A) for A in range(40)]
    assert all(count_sum_of_squares(d, A) == a[A] for A in range(0, A_max + 1, 7))


def test_sphere_and_plane_examples():
    assert count_sphere(3, 1) == 6
    assert count_sphere(3, Fraction(5, 2)) == 0
    assert count_sphere(3, math.sqrt(2)) == 12
    for method in ("filter", "solve"):
        assert count_ball_plane(2, 2, (1, 0), 0, method) == 5


@settings(max_examples=30, deadline=None)
@given(r=st.integers(0, 6), normal=st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3)),
       offset=st.integers(-4, 4))
def test_plane_strategies_agree(r, normal, offset):
    if not any(normal):
        normal = (0, 0, 1)
    a = count_ball_plane(3, r, normal, offset, "filter")
    b = count_ball_plane(3, r, normal, offset, "solve")
    brute = sum(1 for p in itertools.product(range(-r, r + 1), repeat=3)
                if sum(x * x for x in p) <= r * r and sum(x * y for x, y in zip(normal, p)) == offset)
    assert a == b == brute


def test_sphere_bound_constant():
    ratios = [count_sphere(3, R) / sphere_bound(3, R) for R in range(1, 31)]
    C = max(ratios)
    assert math.isfinite(C) and C > 0
    # the fitted constant does not drift: the second half needs no more than twice the first
    assert max(ratios[15:]) <= 2 * max(ratios[:15])


def test_bilinear_examples():
    # |<n2 - n1, n2 - n3>| <= d (N1 + |n2|)(N3 + |n2|): far beyond that there are no solutions
    assert count_bilinear_level_set(3, (1, 0, 0), 10 ** 6, 4, 4) == 0
    brute = 0
    for p in itertools.product(range(-2, 3), repeat=2):
        for q in itertools.product(range(-2, 3), repeat=2):
            if block_of(p) == 2 and block_of(q) == 2 and p != (0, 0) and q != (0, 0):
                brute += (p[0] * q[0] + p[1] * q[1]) == 0
    for method in ("vectorized", "loop"):
        assert count_bilinear_level_set(2, (0, 0), 0, 2, 2, method) == brute == 32


def test_bilinear_constant_stable():
    C = []
    for N in (2, 4, 8):
        counts = bilinear_level_counts(3, (0, 0, 0), N, N)
        C.append(max(counts.values()) / bilinear_bound(3, N, N))
    assert max(C) <= 2 * min(C)


@settings(max_examples=10, deadline=None)
@given(n2=st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3)), mu=st.integers(-20, 20),
       N1=st.sampled_from([1, 2, 4]), N3=st.sampled_from([1, 2, 4]))
def test_bilinear_strategies_agree(n2, mu, N1, N3):
    assert (count_bilinear_level_set(3, n2, mu, N1, N3, "vectorized")
            == count_bilinear_level_set(3, n2, mu, N1, N3, "loop"))


def brute_resonance(d, n, m, Ns, pattern):
    sg = (-1, 1, 1) if pattern == "conj1" else (1, -1, 1)
    k = sg.index(-1)
    pts = [[p for p in itertools.product(range(-N, N + 1), repeat=d) if block_of(p) == N] for N in Ns]
    out = []
    for trip in itertools.product(*pts):
        if any(trip[k] == trip[j] for j in range(3) if j != k):
            continue
        if tuple(sum(s * t[i] for s, t in zip(sg, trip)) for i in range(d)) != tuple(n):
            continue
        if sum(s * sum(x * x for x in t) for s, t in zip(sg, trip)) == m:
            out.append(trip)
    return sorted(out)


@pytest.mark.parametrize("pattern", ["conj1", "conj2"])
def test_resonance_small_exact(pattern):
    got = resonance_set(2, (0, 0), 0, 2, 2, 2, pattern)
    assert got == resonance_set(2, (0, 0), 0, 2, 2, 2, pattern, "hash")
    assert got == brute_resonance(2, (0, 0), 0, (2, 2, 2), pattern)
    assert resonance_set(2, (0, 0), 10 ** 4, 2, 2, 2, pattern) == []


@pytest.mark.parametrize("pattern", ["conj1", "conj2"])
def test_resonance_partition_over_m(pattern):
    n, Ns = (1, 0, 0), (2, 2, 1)
    total = sum(len(resonance_set(3, n, m, *Ns, pattern)) for m in range(-30, 31))
    assert total == convolution_count(3, n, *Ns, pattern)


def test_indicator_examples():
    assert abs(indicator_fourier_coeff(0, 2 * np.pi, 1)) < 1e-15
    assert abs(indicator_fourier_coeff(0, np.pi, 1)) == pytest.approx(2, rel=1e-15)
    assert indicator_fourier_coeff(0.5, 2.0, 0) == 1.5
    with pytest.raises(ValueError):
        indicator_fourier_coeff(2.0, 1.0, 1)


def test_indicator_quadrature():
    rng = np.random.default_rng(5)
    for _ in range(100):
        a, b = np.sort(rng.uniform(0, 2 * np.pi, 2))
        k = int(rng.integers(-20, 21))
        re = integrate.quad(lambda t: math.cos(k * t), a, b, epsabs=1e-13, limit=200)[0]
        im = integrate.quad(lambda t: -math.sin(k * t), a, b, epsabs=1e-13, limit=200)[0]
        got = indicator_fourier_coeff(a, b, k)
        assert abs(got - complex(re, im)) < 1e-10
        if k:
            assert abs(got) <= 2 / abs(k) + 1e-15


def test_matrix_bound_examples():
    b, e = matrix_aat_bound(np.eye(2))
    assert b == pytest.approx(1) and e == pytest.approx(1)
    b, e = matrix_aat_bound(np.ones((2, 2)))
    assert e == pytest.approx(4, rel=1e-12)
    assert b == pytest.approx(2 + 2 * math.sqrt(2), rel=1e-12)  # ordered pairs (1,2) and (2,1)
    b, e = matrix_aat_bound(np.ones((3, 1)))
    assert e <= b


def test_matrix_bound_random_and_diagonal():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        A = rng.standard_normal((8, 12)) + 1j * rng.standard_normal((8, 12))
        b, e = matrix_aat_bound(A)
        assert e <= b * (1 + 1e-12)
        assert e == pytest.approx(np.linalg.norm(A, 2) ** 2, rel=1e-9)
    for _ in range(50):
        n, m = rng.integers(1, 9, 2)
        A = np.zeros((n, m))
        k = min(n, m)
        A[np.arange(k), np.arange(k)] = rng.uniform(0, 3, k)
        b, e = matrix_aat_bound(A)
        assert abs(b - e) <= 1e-9 * max(1.0, b)
    assert matrix_aat_bound(np.zeros((3, 4))) == (0.0, 0.0)


def test_budget_refusal():
    with pytest.raises(BudgetExceeded) as exc:
        count_sum_of_squares(3, 10 ** 6, budget=1000)
    assert exc.value.cost > exc.value.budget == 1000
    with pytest.raises(BudgetExceeded):
        resonance_set(3, (0, 0, 0), 0, 16, 16, 16, budget=10)


def test_query_validation_and_run():
    with pytest.raises(ValueError):
        CountQuery("sphere")
    with pytest.raises(ValueError):
        CountQuery("lattice_walk")
    r = run_query(CountQuery("sphere", d=3, R=1.0))
    assert r.cardinality == 6 and r.ratio == pytest.approx(6.0)
    r = run_query(CountQuery("resonance", d=2, n=(0, 0), m=0, N1=2, N2=2, N3=2))
    assert r.cardinality == len(r.triples)


def test_window_maxima_slope():
    table = sum_of_squares_table(3, 2000)
    ends, maxima = window_maxima(table)
    slope, _ = loglog_slope(ends, maxima)
    assert slope <= 0.5 + 0.15


def test_golden_corpus():
    results, mismatches = golden_corpus()
    assert mismatches == []
    assert corpus_csv(results) == GOLDEN.read_text()
