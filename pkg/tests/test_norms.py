import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randnls.evolution import duhamel_all, free_evolution, propagator_phase
from randnls.field import FourierField, SpaceTimeField
from randnls.lattice import LatticeSpec, project_dyadic
from randnls.norms import (NormSpec, hs_norm, lp_lq_norm, norm_table_csv, spatial_lq_norms, time_lp,
                           time_window, vp_variation, vp_variation_modes, window_hb_norm, xs_proxy, xsb_norm,
                           zs_norm, zs_prime, zs_terms)
from randnls.params import ModelParams, time_grid
from randnls.random_data import deterministic_profile, sample

from conftest import random_field
from oracles import lq_quadrature, vp_exhaustive


def test_hs_constant_mode():
    for d in (1, 2, 3):
        u = FourierField.single_mode(LatticeSpec(d, 2), (0,) * d)
        assert hs_norm(u, 1.7) == pytest.approx((2 * np.pi) ** (d / 2), rel=1e-15)


def test_hs_zero_is_l2():
    u = random_field(3, 3, 1)
    assert hs_norm(u, 0.0) == pytest.approx(u.l2_norm(), rel=1e-13)


def test_hs_profile_lattice_sum():
    p = ModelParams(d=3, alpha=0.0, M=8)
    total = 0.0
    for a in range(-8, 9):
        for b in range(-8, 9):
            for c in range(-8, 9):
                total += (1 + a * a + b * b + c * c) ** -2
    assert hs_norm(deterministic_profile(p), 0.0) == pytest.approx(math.sqrt((2 * np.pi) ** 3 * total), rel=1e-12)


def _const(spec, times, c):
    coeffs = np.zeros((times.size,) + spec.shape, dtype=complex)
    coeffs[(slice(None),) + spec.index_of((0,) * spec.d)] = c
    return SpaceTimeField(spec, times, coeffs)


@pytest.mark.parametrize("p, q", [(2, 2), (4, 4), (3, 6), (math.inf, 2), (1, math.inf)])
def test_lp_lq_constant(p, q):
    spec, delta, c = LatticeSpec(2, 2), 0.3, 0.7 - 0.2j
    u = _const(spec, time_grid(delta, 0.01), c)
    want = abs(c) * (2 * np.pi) ** (0 if math.isinf(q) else 2 / q) * (1 if math.isinf(p) else delta ** (1 / p))
    assert lp_lq_norm(u, p, q) == pytest.approx(want, rel=1e-12)


def test_lp_lq_two_two_is_space_time_l2():
    phi = random_field(2, 3, 2)
    t = time_grid(0.2, 0.01)
    u = free_evolution(phi, t) * 1.0
    frames = np.array([(2 * np.pi) ** 2 * np.sum(np.abs(c) ** 2) for c in u.coeffs])
    want = math.sqrt(np.trapezoid(frames, t))
    assert lp_lq_norm(u, 2, 2) == pytest.approx(want, rel=1e-10)


def test_lp_lq_single_mode_free_evolution():
    spec = LatticeSpec(3, 2)
    phi = FourierField.single_mode(spec, (1, -1, 2), 1.3)
    delta, p, q = 0.1, 4, 6
    u = free_evolution(phi, time_grid(delta, 0.005))
    want = delta ** (1 / p) * lq_quadrature(phi.coeffs, 2, q, 13)
    assert lp_lq_norm(u, p, q, grid_size=13) == pytest.approx(want, rel=1e-10)


def test_spatial_lq_matches_quadrature():
    u = random_field(2, 3, 3)
    st_ = SpaceTimeField.from_frames([0.0], [u])
    assert spatial_lq_norms(st_, 4)[0] == pytest.approx(lq_quadrature(u.coeffs, 3, 4, 13), rel=1e-12)
    assert time_lp(np.array([3.0]), np.array([0.0]), 2) == 0.0


# ----------------------------------------------------------------------------
# V^p


def test_vp_basic_paths():
    assert vp_variation(np.full(7, 2 + 1j), 2) == 0
    h = 0.37
    assert vp_variation(np.r_[np.zeros(4), np.full(5, h)], 2) == pytest.approx(h, rel=1e-15)
    for K in (1, 3, 8, 11):
        stair = h * np.arange(K + 1)
        alt = h * (np.arange(K + 1) % 2)
        assert vp_variation(stair, 2) == pytest.approx(K * h, rel=1e-14)
        assert vp_variation(alt, 2) == pytest.approx(h * math.sqrt(K), rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 9), p=st.sampled_from([1.0, 1.5, 2.0, 3.0]), seed=st.integers(0, 10**6),
       vec=st.booleans())
def test_vp_dp_equals_exhaustive(n, p, seed, vec):
    rng = np.random.default_rng(seed)
    path = rng.standard_normal((n, 2)) if vec else rng.standard_normal(n) + 1j * rng.standard_normal(n)
    assert vp_variation(path, p) == pytest.approx(vp_exhaustive(path, p), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(a=st.integers(2, 8), b=st.integers(2, 8), seed=st.integers(0, 10**6))
def test_vp_superadditive_and_monotone(a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(a), rng.standard_normal(b)
    for p in (1.0, 2.0, 3.0):
        assert vp_variation(np.r_[x, y], p) ** p >= vp_variation(x, p) ** p + vp_variation(y, p) ** p - 1e-12
    vals = [vp_variation(np.r_[x, y], p) for p in (1.0, 1.5, 2.0, 3.0, 5.0)]
    assert all(v2 <= v1 * (1 + 1e-12) for v1, v2 in zip(vals, vals[1:]))


def test_vp_modes_vectorized():
    rng = np.random.default_rng(4)
    paths = rng.standard_normal((9, 5)) + 1j * rng.standard_normal((9, 5))
    got = vp_variation_modes(paths, 2)
    assert np.allclose(got, [vp_variation(paths[:, k], 2) for k in range(5)], rtol=1e-14)
    with pytest.raises(ValueError):
        vp_variation(paths[:, 0], math.inf)


# ----------------------------------------------------------------------------
# X^s proxy and X^{s,b}


def test_xs_proxy_free_evolution_vanishes():
    p = ModelParams(M=4, delta=0.02, dt=1e-3)
    phi = sample(p, 5).field
    u = free_evolution(phi, p.times)
    val = xs_proxy(u, p.s)
    assert val < 1e-12 * hs_norm(phi, p.s)
    assert val <= hs_norm(phi, p.s) * (1 + 1e-9)


def test_xs_proxy_single_jump():
    spec = LatticeSpec(3, 2)
    n, h, s = (1, 2, 0), 0.8, 0.5
    t = time_grid(0.1, 0.01)
    coeffs = np.zeros((t.size,) + spec.shape, dtype=complex)
    idx = spec.index_of(n)
    ph = propagator_phase(spec, t)[(slice(None),) + idx]
    coeffs[(slice(6, None),) + idx] = h * ph[6:]
    u = SpaceTimeField(spec, t, coeffs)
    assert xs_proxy(u, s) == pytest.approx(math.sqrt(1 + 5) ** s * h, rel=1e-13)


def test_xs_proxy_duhamel_refinement():
    spec = LatticeSpec(2, 3)
    f0 = random_field(2, 3, 6)
    vals = []
    for dt in (2e-3, 1e-3):
        t = time_grid(0.1, dt)
        f = SpaceTimeField(spec, t, np.broadcast_to(f0.coeffs, (t.size,) + spec.shape))
        vals.append(xs_proxy(duhamel_all(f), 0.5))
    assert abs(vals[0] - vals[1]) <= 0.02 * vals[1]


def test_xsb_zero_field():
    u = SpaceTimeField.zeros(LatticeSpec(2, 2), time_grid(0.1, 0.01))
    assert xsb_norm(u, 0.5, 0.5) == 0


@pytest.mark.parametrize("window", ["taper", "zero"])
@pytest.mark.parametrize("b", [0.0, 0.5, 1.0])
def test_xsb_free_evolution_factorizes(window, b):
    p = ModelParams(M=3, delta=0.02, dt=1e-3)
    phi = sample(p, 7).field
    u = free_evolution(phi, p.times)
    want = hs_norm(phi, p.s) * window_hb_norm(p.steps, p.dt, b, window)
    assert xsb_norm(u, p.s, b, window) == pytest.approx(want, rel=1e-12)


def test_xsb_b_zero_is_weighted_l2():
    phi = random_field(2, 3, 8)
    t = time_grid(0.05, 1e-3)
    g = random_field(2, 3, 9)
    u = SpaceTimeField(phi.spec, t, np.array([phi.coeffs * np.cos(30 * tk) + g.coeffs * tk for tk in t]))
    s = 0.7
    w = phi.spec.bracket ** (2 * s)
    frames = np.array([(2 * np.pi) ** 2 * np.sum(w * np.abs(c) ** 2) for c in u.coeffs])
    assert xsb_norm(u, s, 0.0, "zero") == pytest.approx(math.sqrt(np.trapezoid(frames, t)), rel=1e-10)


def test_xsb_rejects_bad_grids():
    u = random_field(1, 2, 0)
    with pytest.raises(ValueError):
        xsb_norm(SpaceTimeField.from_frames([0.0, 0.1, 0.3], [u, u, u]), 0.5, 0.5)
    with pytest.raises(ValueError):
        time_window(4, "boxcar")


# ----------------------------------------------------------------------------
# Z^s


def test_zs_single_block():
    spec = LatticeSpec(3, 4)
    phi = project_dyadic(random_field(3, 4, 10), 4)
    t = time_grid(0.02, 0.005)
    u = free_evolution(phi, t)
    s, N, G = 0.5, 4, 17
    l4 = np.array([lq_quadrature(c, 4, 4, G) for c in u.coeffs])
    want = N ** (s + (2 - 3) / 4) * np.trapezoid(l4 ** 4, t) ** 0.25
    assert zs_norm(u, s, grid_size=G) == pytest.approx(want, rel=1e-10)
    terms = zs_terms(u, s, G)
    assert [N_ for N_, v in terms.items() if v > 0] == [4]


def test_zs_bounded_by_data_norm():
    # fit C on half of the data, check the other half stays below 1.5 C
    p = ModelParams(M=4, delta=0.02, dt=2e-3)
    ratios = []
    for seed in range(40):
        phi = sample(p, seed).field
        u = free_evolution(phi, p.times)
        ratios.append(zs_norm(u, p.s) / hs_norm(phi, p.s))
    C = max(ratios[:20])
    assert max(ratios[20:]) <= 1.5 * C


def test_zs_prime_combines():
    p = ModelParams(M=3, delta=0.01, dt=1e-3)
    u = duhamel_all(free_evolution(sample(p, 1).field, p.times))
    assert zs_prime(u, p.s) == pytest.approx(zs_norm(u, p.s) ** 0.75 * xs_proxy(u, p.s) ** 0.25, rel=1e-14)


def test_normspec_and_table():
    p = ModelParams(M=2, delta=0.01, dt=1e-3)
    u = free_evolution(sample(p, 2).field, p.times)
    rows = [(NormSpec(k, s=0.5, b=0.5, p=4, q="inf"), u, NormSpec(k, s=0.5, b=0.5, p=4, q="inf").evaluate(u))
            for k in ("Hs", "LpLq", "Vp", "XsProxy", "Xsb", "Zs", "ZsPrime")]
    text = norm_table_csv(rows)
    lines = text.splitlines()
    assert lines[0].startswith("kind,s,b,p,q,window,grid_size")
    assert len(lines) == 8
    v = float(lines[1].rsplit(",", 1)[1])
    assert v == rows[0][2]
    with pytest.raises(ValueError):
        NormSpec("Besov")
    with pytest.raises(ValueError):
        NormSpec("LpLq", p=0.5)
