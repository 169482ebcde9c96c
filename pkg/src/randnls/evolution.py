"""Linear flow, Duhamel integral, gauged cubic nonlinearity and the gauge transform.

Sign convention: ``i u_t + Laplacian u = F`` and ``e^{it Laplacian}`` multiplies
``u_hat(n)`` by ``exp(-i t |n|^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import FourierField, SpaceTimeField, triple_product_array
from .lattice import LatticeSpec


def propagator_phase(spec: LatticeSpec, t) -> np.ndarray:
    """``exp(-i t |n|^2)``; with array ``t`` the time axis leads."""
    t = np.asarray(t, dtype=float)
    return np.exp(-1j * t.reshape(t.shape + (1,) * spec.d) * spec.sq_norm)


def propagate(u: FourierField, t: float) -> FourierField:
    return FourierField(u.spec, u.coeffs * propagator_phase(u.spec, t))


def free_evolution(phi: FourierField, times) -> SpaceTimeField:
    times = np.asarray(times, dtype=float)
    return SpaceTimeField(phi.spec, times, phi.coeffs[None] * propagator_phase(phi.spec, times))


# ----------------------------------------------------------------------------
# nonlinearity


def mean_product(c2: np.ndarray, c3: np.ndarray, d: int, conj2: bool = True) -> np.ndarray:
    """``(2pi)^{-d} int conj(v2) v3 dx`` per leading index."""
    axes = tuple(range(c2.ndim - d, c2.ndim))
    if conj2:
        return np.sum(np.conj(c2) * c3, axis=axes)
    return np.sum(c2[(Ellipsis,) + (slice(None, None, -1),) * d] * c3, axis=axes)


def nonlinearity_parts_array(c1, c2, c3, spec: LatticeSpec, rho: int, conj2: bool = True,
                             mean_normalized: bool = True, grid_size: int | None = None):
    """Arrays ``(N1, N2)`` with ``N1 = rho v1 v2~ v3`` and ``N2 = -2 rho v1 <v2~ v3>``.

    ``<.>`` is the spatial mean when ``mean_normalized`` (default) and the plain
    integral over ``T^d`` otherwise.
    """
    d, M = spec.d, spec.M
    n1 = rho * triple_product_array(c1, c2, c3, d, M, conj2, grid_size)
    m = mean_product(c2, c3, d, conj2)
    if not mean_normalized:
        m = m * (2 * np.pi) ** d
    n2 = -2 * rho * c1 * np.asarray(m).reshape(np.shape(m) + (1,) * d)
    return n1, n2


def nonlinearity_parts(v1: FourierField, v2: FourierField, v3: FourierField, rho: int,
                       conj2: bool = True, mean_normalized: bool = True):
    n1, n2 = nonlinearity_parts_array(v1.coeffs, v2.coeffs, v3.coeffs, v1.spec, rho, conj2, mean_normalized)
    return FourierField(v1.spec, n1), FourierField(v1.spec, n2)


def nonlinearity(v1: FourierField, v2: FourierField, v3: FourierField, rho: int,
                 conj2: bool = True, mean_normalized: bool = True) -> FourierField:
    """Gauged nonlinearity ``N(v1, v2, v3) = N1 + N2``; slot 2 is conjugated by default."""
    a, b = nonlinearity_parts(v1, v2, v3, rho, conj2, mean_normalized)
    return a + b


def gauged_nonlinearity_array(c: np.ndarray, spec: LatticeSpec, rho: int, mean_normalized: bool = True,
                              grid_size: int | None = None) -> np.ndarray:
    """``N(v) = N(v, conj v, v)`` for a stack of frames."""
    n1, n2 = nonlinearity_parts_array(c, c, c, spec, rho, True, mean_normalized, grid_size)
    return n1 + n2


def cubic_array(c: np.ndarray, spec: LatticeSpec, rho: int, grid_size: int | None = None) -> np.ndarray:
    """Plain cubic term ``rho |u|^2 u``."""
    return rho * triple_product_array(c, c, c, spec.d, spec.M, True, grid_size)


# ----------------------------------------------------------------------------
# Duhamel


def _cumulative_trapezoid(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    h = np.diff(t).reshape((-1,) + (1,) * (y.ndim - 1))
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * h * (y[1:] + y[:-1]), axis=0)
    return out


def duhamel_all(f: SpaceTimeField) -> SpaceTimeField:
    """``I(f)(t_k) = int_0^{t_k} e^{i(t_k - t') Laplacian} f(t') dt'`` at every node.

    Trapezoidal rule on the interaction-picture integrand ``e^{-it' Laplacian} f(t')``,
    so the linear phase is exact and the quadrature is second order.
    """
    t = f.times - f.times[0]
    back = np.conj(propagator_phase(f.spec, t))
    acc = _cumulative_trapezoid(back * f.coeffs, t)
    return SpaceTimeField(f.spec, f.times, acc * propagator_phase(f.spec, t))


def _node_index(times: np.ndarray, t) -> int:
    if isinstance(t, (int, np.integer)):
        k = int(t)
        if not 0 <= k < times.size:
            raise ValueError(f"node index {k} outside the grid")
        return k
    t = float(t)
    if t < times[0] - 1e-15 or t > times[-1] + 1e-12:
        raise ValueError(f"t={t} outside [{times[0]}, {times[-1]}]")
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"t={t} is not a grid node")
    return k


def duhamel(f: SpaceTimeField, t) -> FourierField:
    """Duhamel integral at one node, given either as an index or as a time on the grid."""
    k = _node_index(f.times, t)
    if k == 0:
        return FourierField.zeros(f.spec)
    head = SpaceTimeField(f.spec, f.times[: k + 1], f.coeffs[: k + 1])
    return duhamel_all(head).frame(k)


# ----------------------------------------------------------------------------
# gauge


@dataclass(frozen=True, eq=False)
class GaugePhase:
    times: np.ndarray
    beta: np.ndarray
    Phi: np.ndarray


def gauge_phase(v: SpaceTimeField, mean_normalized: bool = True) -> GaugePhase:
    """``beta(t) = 2 <|v|^2>`` and its trapezoidal primitive ``Phi`` with ``Phi(0) = 0``."""
    axes = tuple(range(1, v.coeffs.ndim))
    beta = 2.0 * np.sum(np.abs(v.coeffs) ** 2, axis=axes)
    if not mean_normalized:
        beta = beta * (2 * np.pi) ** v.spec.d
    Phi = _cumulative_trapezoid(beta, v.times - v.times[0])
    return GaugePhase(v.times, beta, Phi)


def gauge_factor(v: SpaceTimeField, rho: int, direction: str = "forward", mean_normalized: bool = True) -> np.ndarray:
    if direction not in ("forward", "inverse"):
        raise ValueError("direction must be 'forward' or 'inverse'")
    sign = -1.0 if direction == "forward" else 1.0
    return np.exp(sign * 1j * rho * gauge_phase(v, mean_normalized).Phi)


def gauge_transform(v: SpaceTimeField, rho: int, direction: str = "forward",
                    mean_normalized: bool = True) -> SpaceTimeField:
    """Forward: ``u = e^{-i rho Phi_v} v`` (gauged solution to NLS solution); inverse uses ``e^{+i rho Phi}``."""
    fac = gauge_factor(v, rho, direction, mean_normalized)
    return SpaceTimeField(v.spec, v.times, v.coeffs * fac.reshape((-1,) + (1,) * v.spec.d))
