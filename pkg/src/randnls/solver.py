"""Picard construction of the gauged solution and a direct time stepper for plain NLS.

``v = v0 + w`` where ``v0`` is the free evolution of the data and ``w`` is the
fixed point of ``w -> -i I(N(w + v0))`` with ``w(0) = 0``.  The NLS solution is
``u = e^{-i rho Phi_v} v``.  ``direct_step_solve`` integrates plain NLS with
classical RK4 in the interaction picture and serves as an independent check.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .evolution import (cubic_array, duhamel_all, free_evolution, gauge_transform,
                        gauged_nonlinearity_array, propagator_phase)
from .field import FourierField, SpaceTimeField, product_grid_size
from .params import ModelParams

log = logging.getLogger(__name__)

HALVING_RATIO = 0.5
HALVING_PATIENCE = 3
MAX_HALVINGS = 8


class NumericalFailure(RuntimeError):
    """A solver left its trusted regime; ``diagnostics`` says how."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class PicardFailure(NumericalFailure):
    pass


class StepInstability(NumericalFailure):
    pass


@dataclass
class PicardDiagnostics:
    iterates: int = 0
    diffs: list = field(default_factory=list)
    contraction_ratios: list = field(default_factory=list)
    final_residual: float = float("nan")
    delta_used: float = float("nan")
    converged: bool = False
    restarts: list = field(default_factory=list)

    @property
    def restart_ratios(self) -> list:
        return [r["ratio"] for r in self.restarts]

    @property
    def monotone(self) -> bool:
        r = self.restart_ratios
        return all(b <= a * (1 + 1e-12) for a, b in zip(r, r[1:]))

    def first_iteration_below(self, threshold: float = HALVING_RATIO):
        """1-based iteration at which the successive-difference ratio first drops below ``threshold``."""
        for k, r in enumerate(self.contraction_ratios):
            if r < threshold:
                return k + 2
        return None

    def to_dict(self) -> dict:
        return {
            "iterates": self.iterates,
            "diffs": list(map(float, self.diffs)),
            "contraction_ratios": list(map(float, self.contraction_ratios)),
            "final_residual": float(self.final_residual),
            "delta_used": float(self.delta_used),
            "converged": self.converged,
            "monotone": self.monotone,
            "restarts": self.restarts,
        }


def hs_weights(spec, s: float) -> np.ndarray:
    return (2 * np.pi) ** spec.d * spec.bracket ** (2 * s)


def sup_hs(coeffs: np.ndarray, spec, s: float) -> float:
    """``sup_t ||.||_{H^s}`` of a frame stack."""
    axes = tuple(range(1, coeffs.ndim))
    return float(np.sqrt(np.max(np.sum(hs_weights(spec, s) * np.abs(coeffs) ** 2, axis=axes))))


def linear_evolution_of_data(params: ModelParams, data) -> SpaceTimeField:
    """Free evolution ``S(t) phi`` on the parameter time grid; ``data`` is a FourierField or RandomField."""
    phi = data if isinstance(data, FourierField) else data.field
    return free_evolution(phi, params.times)


def picard_map(w: np.ndarray, v0: SpaceTimeField, params: ModelParams, grid_size=None) -> np.ndarray:
    f = gauged_nonlinearity_array(w + v0.coeffs, v0.spec, params.rho, params.mean_normalized, grid_size)
    return -1j * duhamel_all(SpaceTimeField(v0.spec, v0.times, f)).coeffs


def _truncate(v0: SpaceTimeField, steps: int) -> SpaceTimeField:
    return SpaceTimeField(v0.spec, v0.times[: steps + 1], v0.coeffs[: steps + 1])


def picard_solve(params: ModelParams, v0: SpaceTimeField, tol: float = 1e-8, max_iter: int = 25,
                 max_halvings: int = MAX_HALVINGS):
    """Fixed point ``w`` of the gauged Duhamel map, with ``delta`` halving on slow contraction.

    Successive differences are measured in ``sup_t H^s``.  When the ratio of
    consecutive differences stays ``>= 1/2`` for three iterations the horizon is
    halved (keeping the time step) and the iteration restarts.  Returns
    ``(w, diagnostics)``; raises ``PicardFailure`` after ``max_halvings`` halvings.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    spec = v0.spec
    G = product_grid_size(spec.M)
    diag = PicardDiagnostics()
    steps = len(v0) - 1
    grid = v0
    for attempt in range(max_halvings + 1):
        w = np.zeros_like(grid.coeffs)
        diffs, ratios = [], []
        slow = 0
        ok = False
        for it in range(1, max_iter + 1):
            w_new = picard_map(w, grid, params, G)
            diff = sup_hs(w_new - w, spec, params.s)
            w = w_new
            diffs.append(diff)
            if not np.isfinite(diff):
                break
            if len(diffs) > 1 and diffs[-2] > 0:
                ratios.append(diff / diffs[-2])
                slow = slow + 1 if ratios[-1] >= HALVING_RATIO else 0
            if diff < tol:
                ok = True
                break
            if slow >= HALVING_PATIENCE:
                break
        head = ratios[:HALVING_PATIENCE]
        diag.restarts.append({
            "delta": float(grid.delta), "steps": len(grid) - 1, "iterations": len(diffs),
            "ratio": float(max(head)) if head else 0.0, "converged": ok,
        })
        diag.iterates, diag.diffs, diag.contraction_ratios = len(diffs), diffs, ratios
        if ok:
            diag.converged = True
            diag.delta_used = float(grid.delta)
            w[0] = 0.0
            wf = SpaceTimeField(spec, grid.times, w)
            v = grid + wf
            diag.final_residual = gauged_residual(v, grid.frame(0), params, G)
            if not diag.monotone:
                raise PicardFailure("contraction ratio increased after halving delta", diag)
            return wf, diag
        if steps // 2 < 1:
            break
        log.info("picard: no contraction on delta=%g (ratios %s); halving", grid.delta, ratios[-3:])
        steps //= 2
        grid = _truncate(v0, steps)
    diag.delta_used = float(grid.delta)
    raise PicardFailure(f"no contraction after {len(diag.restarts) - 1} halvings of delta", diag)


# ----------------------------------------------------------------------------
# residuals


def mild_defect(u: SpaceTimeField, phi: FourierField, forcing: np.ndarray) -> np.ndarray:
    """``u(t) - S(t) phi + i I(F)(t)`` per node, for a frame stack ``F``."""
    duh = duhamel_all(SpaceTimeField(u.spec, u.times, forcing)).coeffs
    free = phi.coeffs[None] * propagator_phase(u.spec, u.times - u.times[0])
    return u.coeffs - free + 1j * duh


def _l2_in_time(defect: np.ndarray, times: np.ndarray, d: int) -> float:
    axes = tuple(range(1, defect.ndim))
    sq = (2 * np.pi) ** d * np.sum(np.abs(defect) ** 2, axis=axes)
    if times.size == 1:
        return 0.0
    return float(np.sqrt(np.trapezoid(sq, times)))


def gauged_residual(v: SpaceTimeField, phi: FourierField, params: ModelParams, grid_size=None) -> float:
    """Discrete ``L^2_t L^2_x`` defect of ``v`` in the gauged equation (mild form)."""
    f = gauged_nonlinearity_array(v.coeffs, v.spec, params.rho, params.mean_normalized, grid_size)
    return _l2_in_time(mild_defect(v, phi, f), v.times, v.spec.d)


def nls_residual(u: SpaceTimeField, phi: FourierField, params: ModelParams, grid_size=None) -> float:
    """Discrete ``L^2_t L^2_x`` defect of ``u`` in plain NLS ``i u_t + Laplacian u = rho |u|^2 u`` (mild form)."""
    f = cubic_array(u.coeffs, u.spec, params.rho, grid_size)
    return _l2_in_time(mild_defect(u, phi, f), u.times, u.spec.d)


def sup_l2_distance(a: SpaceTimeField, b: SpaceTimeField) -> float:
    n = min(len(a), len(b))
    if not np.allclose(a.times[:n], b.times[:n], rtol=1e-12, atol=1e-15):
        raise ValueError("fields are on different time grids")
    return float(np.max((a - b if len(a) == len(b) else _head(a, n) - _head(b, n)).l2_norms()))


def _head(u: SpaceTimeField, n: int) -> SpaceTimeField:
    return SpaceTimeField(u.spec, u.times[:n], u.coeffs[:n])


# ----------------------------------------------------------------------------
# direct stepper


def direct_step_solve(params: ModelParams, phi: FourierField, times=None) -> SpaceTimeField:
    """Classical RK4 for plain NLS in the interaction picture ``psi = e^{-it Laplacian} u``."""
    spec = phi.spec
    times = params.times if times is None else np.asarray(times, dtype=float)
    G = product_grid_size(spec.M)
    rho = params.rho

    def rhs(t, psi):
        ph = propagator_phase(spec, t)
        return -1j * np.conj(ph) * cubic_array(ph * psi, spec, rho, G)

    out = np.empty((times.size,) + spec.shape, dtype=complex)
    psi = phi.coeffs.copy()
    out[0] = psi
    norm = np.linalg.norm(psi)
    for k in range(times.size - 1):
        t, h = times[k], times[k + 1] - times[k]
        k1 = rhs(t, psi)
        k2 = rhs(t + h / 2, psi + (h / 2) * k1)
        k3 = rhs(t + h / 2, psi + (h / 2) * k2)
        k4 = rhs(t + h, psi + h * k3)
        psi = psi + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        new_norm = np.linalg.norm(psi)
        if not np.isfinite(new_norm) or (norm > 0 and new_norm > 10 * norm):
            raise StepInstability(
                f"norm grew from {norm:.3e} to {new_norm:.3e} in step {k} (dt={h:g})",
                {"step": k, "time": float(t), "dt": float(h), "norm_before": float(norm), "norm_after": float(new_norm)},
            )
        norm = new_norm
        out[k + 1] = psi
    out *= propagator_phase(spec, times - times[0])
    return SpaceTimeField(spec, times, out)


# ----------------------------------------------------------------------------
# full pipeline


@dataclass
class SolveResult:
    params: ModelParams
    phi: FourierField
    v0: SpaceTimeField
    w: SpaceTimeField
    u: SpaceTimeField
    u_direct: SpaceTimeField
    diagnostics: PicardDiagnostics
    nls_residual: float
    mismatch: float

    def summary(self) -> dict:
        return {
            "delta_used": self.diagnostics.delta_used,
            "iterates": self.diagnostics.iterates,
            "gauged_residual": self.diagnostics.final_residual,
            "nls_residual": self.nls_residual,
            "sup_l2_mismatch": self.mismatch,
            "first_ratio_below_half": self.diagnostics.first_iteration_below(),
        }


def solve(params: ModelParams, phi: FourierField, tol: float = 1e-8, max_iter: int = 25) -> SolveResult:
    """Picard solve, ungauge, and cross-check against the direct stepper on the same grid."""
    v0 = free_evolution(phi, params.times)
    w, diag = picard_solve(params, v0, tol, max_iter)
    v0 = _head(v0, len(w))
    v = v0 + w
    u = gauge_transform(v, params.rho, "forward", params.mean_normalized)
    u_direct = direct_step_solve(params, phi, w.times)
    res = nls_residual(u, phi, params)
    return SolveResult(params, phi, v0, w, u, u_direct, diag, res, sup_l2_distance(u, u_direct))
