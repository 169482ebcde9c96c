import numpy as np
import pytest

from randnls.evolution import free_evolution, gauge_transform
from randnls.field import FourierField, SpaceTimeField
from randnls.norms import hs_norm
from randnls.params import ModelParams
from randnls.random_data import sample
from randnls.solver import (PicardFailure, StepInstability, direct_step_solve, gauged_residual,
                            linear_evolution_of_data, nls_residual, picard_map, picard_solve, solve,
                            sup_hs, sup_l2_distance)

ORIGIN = (0, 0, 0)


def test_linear_evolution_of_data():
    p = ModelParams(M=4, delta=0.02, dt=1e-3)
    r = sample(p, 2)
    v0 = linear_evolution_of_data(p, r)
    assert np.array_equal(v0.coeffs[0], r.field.coeffs)
    norms = v0.l2_norms()
    assert np.allclose(norms, norms[0], rtol=1e-13)


def test_randomization_does_not_regularize():
    # median H^sigma norm over 100 seeds: squared-norm increments per octave shrink below
    # the threshold regularity s_c - alpha = 1/2 and grow above it
    def increments(sigma):
        med = [np.median([hs_norm(sample(ModelParams(M=M), s).field, sigma) for s in range(100)])
               for M in (8, 16, 32)]
        sq = np.square(med)
        return (sq[2] - sq[1]) / (sq[1] - sq[0])

    assert increments(0.4) < 1.0
    assert increments(0.6) > 1.0


def test_zero_data_one_iteration():
    p = ModelParams(M=3, delta=0.01, dt=1e-3)
    v0 = free_evolution(FourierField.zeros(p.spec), p.times)
    w, diag = picard_solve(p, v0)
    assert diag.iterates == 1 and diag.converged
    assert not np.any(w.coeffs)


def _const_field(p, c):
    return FourierField.single_mode(p.spec, ORIGIN, c)


@pytest.mark.parametrize("rho", [1, -1])
def test_constant_data_closed_form(rho):
    p = ModelParams(d=3, M=4, rho=rho, delta=0.05, dt=1e-3)
    c = 0.9 - 0.4j
    v0 = free_evolution(_const_field(p, c), p.times)
    w, diag = picard_solve(p, v0, tol=1e-12)
    v = v0 + w
    want = c * np.exp(1j * rho * abs(c) ** 2 * v.times)
    got = v.coeffs[(slice(None),) + p.spec.index_of(ORIGIN)]
    assert np.max(np.abs(got - want)) < 1e-6
    assert diag.delta_used == pytest.approx(0.05)


def test_fixed_point_consistency_and_zero_start():
    p = ModelParams(M=3, delta=0.01, dt=5e-4)
    tol = 1e-9
    v0 = free_evolution(sample(p, 4).field, p.times)
    w, diag = picard_solve(p, v0, tol=tol)
    assert not np.any(w.coeffs[0])
    assert sup_hs(picard_map(w.coeffs, v0, p) - w.coeffs, p.spec, p.s) <= 2 * tol
    assert diag.first_iteration_below() is not None and diag.first_iteration_below() <= 6


def test_random_seed_matches_direct_stepper():
    p = ModelParams(d=3, alpha=0.0, M=8, delta=0.01, dt=5e-5)
    r = solve(p, sample(p, 3).field)
    assert r.diagnostics.delta_used == pytest.approx(0.01)
    assert r.mismatch < 1e-5
    assert r.diagnostics.final_residual < 1e-9


def test_gauge_consistency_is_second_order():
    # the mismatch between the two solvers is O(dt^2); its constant depends on the data size
    out = []
    for dt in (5e-4, 2.5e-4):
        p = ModelParams(M=4, delta=0.01, dt=dt)
        out.append(solve(p, sample(p, 8).field).mismatch)
    assert out[0] / out[1] == pytest.approx(4, rel=0.1)


def test_halving_restarts_are_monotone():
    p = ModelParams(M=2, delta=0.05, dt=1e-3)
    v0 = free_evolution(sample(p, 1).field * 3, p.times)
    w, diag = picard_solve(p, v0)
    assert len(diag.restarts) > 1 and diag.monotone
    assert diag.delta_used < p.delta
    assert len(w) - 1 == diag.restarts[-1]["steps"]


def test_picard_failure_has_diagnostics():
    p = ModelParams(M=2, delta=0.05, dt=1e-3)
    v0 = free_evolution(sample(p, 1).field * 8, p.times)
    with pytest.raises(PicardFailure) as exc:
        picard_solve(p, v0, max_halvings=3)
    d = exc.value.diagnostics
    assert len(d.restarts) == 4 and not d.converged
    assert d.to_dict()["restarts"][0]["delta"] == pytest.approx(0.05)


def test_direct_zero_data():
    p = ModelParams(M=3, delta=0.01, dt=1e-3)
    u = direct_step_solve(p, FourierField.zeros(p.spec))
    assert not np.any(u.coeffs)


def test_direct_plane_wave():
    p = ModelParams(d=3, M=4, delta=0.1, dt=1e-4)
    n, c = (1, 0, 0), 1.0
    u = direct_step_solve(p, FourierField.single_mode(p.spec, n, c))
    exact = np.zeros_like(u.coeffs)
    exact[(slice(None),) + p.spec.index_of(n)] = c * np.exp(-1j * (1 + abs(c) ** 2) * u.times)
    assert sup_l2_distance(u, SpaceTimeField(p.spec, u.times, exact)) < 1e-8


def test_direct_mass_conservation():
    p = ModelParams(M=4, delta=0.05, dt=1e-4)
    u = direct_step_solve(p, sample(p, 6).field)
    m = u.l2_norms() ** 2
    assert np.max(np.abs(m - m[0])) / m[0] < 1e-8


def test_step_instability():
    p = ModelParams(M=2, delta=0.5, dt=0.25)
    with pytest.raises(StepInstability) as exc:
        direct_step_solve(p, sample(p, 0).field * 50)
    assert "dt" in exc.value.diagnostics


def test_residuals_of_exact_constant_solution():
    p = ModelParams(M=2, delta=0.05, dt=1e-3)
    c = 0.5
    phi = _const_field(p, c)
    r = solve(p, phi, tol=1e-13)
    assert r.nls_residual < 1e-8
    v = gauge_transform(r.u, 1, "inverse")
    assert gauged_residual(v, phi, p) < 1e-8
    assert nls_residual(r.u_direct, phi, p) < 1e-8
