import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randnls.evolution import (duhamel, duhamel_all, free_evolution, gauge_phase, gauge_transform,
                               nonlinearity, nonlinearity_parts, propagate)
from randnls.field import FourierField, SpaceTimeField, direct_convolution
from randnls.lattice import LatticeSpec
from randnls.params import ModelParams, time_grid
from randnls.solver import gauged_residual, nls_residual

from conftest import random_field

ORIGIN = (0, 0, 0)


def test_propagate_identity_and_phase():
    u = random_field(3, 2, 1)
    assert np.array_equal(propagate(u, 0.0).coeffs, u.coeffs)
    e = FourierField.single_mode(LatticeSpec(3, 2), (1, 0, 0), 2.0)
    assert propagate(e, np.pi)[(1, 0, 0)] == pytest.approx(-2.0, abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(t1=st.floats(-5, 5), t2=st.floats(-5, 5), seed=st.integers(0, 1000))
def test_unitarity_and_group_law(t1, t2, seed):
    u = random_field(2, 4, seed)
    a = propagate(u, t1 + t2)
    b = propagate(propagate(u, t1), t2)
    assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-13 * max(1.0, np.max(np.abs(u.coeffs)))
    assert a.l2_norm() == pytest.approx(u.l2_norm(), rel=1e-13)


@pytest.mark.parametrize("rho", [1, -1])
def test_nonlinearity_constant(rho):
    spec = LatticeSpec(3, 2)
    c = 0.6 + 0.9j
    v = FourierField.single_mode(spec, ORIGIN, c)
    out = nonlinearity(v, v, v, rho)
    assert out[ORIGIN] == pytest.approx(-rho * abs(c) ** 2 * c, abs=1e-14)
    assert np.sum(np.abs(out.coeffs) > 1e-14) == 1


def test_nonlinearity_single_mode_hand_convolution():
    spec = LatticeSpec(2, 3)
    a = 1.5 - 0.5j
    v = FourierField.single_mode(spec, (2, -1), a)
    n1, n2 = nonlinearity_parts(v, v, v, 1)
    ref = direct_convolution(v, v, v)
    assert np.allclose(n1.coeffs, ref.coeffs, atol=1e-13)
    assert n1[(2, -1)] == pytest.approx(abs(a) ** 2 * a, abs=1e-13)
    assert n2[(2, -1)] == pytest.approx(-2 * abs(a) ** 2 * a, abs=1e-13)
    assert (n1 + n2)[(2, -1)] == pytest.approx(-abs(a) ** 2 * a, abs=1e-13)


def test_nonlinearity_integral_normalization():
    spec = LatticeSpec(1, 2)
    c = 0.5
    v = FourierField.single_mode(spec, (0,), c)
    _, n2 = nonlinearity_parts(v, v, v, 1, mean_normalized=False)
    assert n2[(0,)] == pytest.approx(-2 * (2 * np.pi) * c ** 3)


def _const_in_time(spec, times, n, value):
    coeffs = np.zeros((times.size,) + spec.shape, dtype=complex)
    coeffs[(slice(None),) + spec.index_of(n)] = value
    return SpaceTimeField(spec, times, coeffs)


def test_duhamel_zero_and_mode_zero():
    spec = LatticeSpec(3, 2)
    t = time_grid(0.1, 1e-2)
    assert not np.any(duhamel_all(SpaceTimeField.zeros(spec, t)).coeffs)
    f = _const_in_time(spec, t, ORIGIN, 2 - 1j)
    assert duhamel(f, 0.05)[ORIGIN] == pytest.approx(0.05 * (2 - 1j), abs=1e-15)
    assert duhamel(f, len(t) - 1)[ORIGIN] == pytest.approx(0.1 * (2 - 1j), abs=1e-15)
    assert not np.any(duhamel(f, 0).coeffs)
    with pytest.raises(ValueError):
        duhamel(f, 0.0512)


def test_duhamel_single_mode_second_order():
    spec = LatticeSpec(3, 2)
    n = (2, 1, 0)
    k2 = 5.0
    T = 0.5
    exact = (1 - np.exp(-1j * T * k2)) / (1j * k2)
    errs = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        t = time_grid(T, dt)
        errs.append(abs(duhamel(_const_in_time(spec, t, n, 1.0), T)[n] - exact))
    assert errs[0] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


def test_gauge_zero_is_identity():
    spec = LatticeSpec(2, 2)
    z = SpaceTimeField.zeros(spec, time_grid(0.1, 0.01))
    assert np.array_equal(gauge_transform(z, 1).coeffs, z.coeffs)


@pytest.mark.parametrize("rho", [1, -1])
def test_gauge_constant_solution(rho):
    p = ModelParams(d=3, M=2, rho=rho, delta=0.05, dt=1e-3)
    spec, t = p.spec, p.times
    c = 0.8 + 0.3j
    v = _const_in_time(spec, t, ORIGIN, c * np.exp(1j * rho * abs(c) ** 2 * t))
    u = gauge_transform(v, rho)
    want = c * np.exp(-1j * rho * abs(c) ** 2 * t)
    assert np.max(np.abs(u.coeffs[(slice(None),) + spec.index_of(ORIGIN)] - want)) < 1e-14
    phi = v.frame(0)
    assert gauged_residual(v, phi, p) < 1e-8
    assert nls_residual(u, phi, p) < 1e-8
    back = gauge_transform(u, rho, "inverse")
    # the inverse gauge uses Phi of its own argument, which has the same modulus
    assert np.allclose(back.coeffs, v.coeffs, atol=1e-14)


def test_gauge_preserves_mass_pointwise():
    u0 = random_field(2, 3, 5)
    t = time_grid(0.1, 1e-3)
    v = free_evolution(u0, t)
    g = gauge_transform(v, 1)
    assert np.allclose(g.l2_norms(), v.l2_norms(), rtol=1e-14)
    ph = gauge_phase(v)
    assert ph.Phi[0] == 0 and np.all(np.diff(ph.Phi) > 0)
    with pytest.raises(ValueError):
        gauge_transform(v, 1, "sideways")
