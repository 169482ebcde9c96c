"""Computable norms and proxies for fields on the truncated lattice.

``hs_norm`` and ``lp_lq_norm`` are exact up to quadrature.  ``vp_variation`` is the
exact supremum over partitions of the sampling grid.  ``xs_proxy``, ``xsb_norm``
and ``zs_norm`` are surrogates: the function-space norms they stand in for are
defined through infima over extensions or atomic decompositions, which are not
computable.  ``xs_proxy`` is a lower bound (V^2 in place of U^2); ``xsb_norm`` uses
one fixed extension and so is an upper-bound type surrogate.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.fft as sfft

from .evolution import propagator_phase
from .field import FourierField, SpaceTimeField, product_grid_size, to_physical_array
from .lattice import project_dyadic

KINDS = ("Hs", "LpLq", "Vp", "XsProxy", "Xsb", "Zs", "ZsPrime")
WINDOWS = ("taper", "zero")


def _exponent(p) -> float:
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "oo"):
            return math.inf
        p = float(p)
    p = float(p)
    if not p >= 1:
        raise ValueError(f"exponent must be >= 1, got {p}")
    return p


@dataclass(frozen=True)
class NormSpec:
    kind: str
    s: float = 0.0
    b: float = 0.0
    p: float = 2.0
    q: float = 2.0
    grid_size: int | None = None
    window: str = "taper"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "p", _exponent(self.p))
        object.__setattr__(self, "q", _exponent(self.q))
        if self.window not in WINDOWS:
            raise ValueError(f"window must be one of {WINDOWS}")
        if self.grid_size is not None and self.grid_size < 1:
            raise ValueError("grid_size must be positive")

    def evaluate(self, u) -> float:
        k = self.kind
        if k == "Hs":
            return hs_norm(u if isinstance(u, FourierField) else u.frame(0), self.s)
        if k == "LpLq":
            return lp_lq_norm(u, self.p, self.q, self.grid_size)
        if k == "Vp":
            return vp_variation(_twisted(u), self.p)
        if k == "XsProxy":
            return xs_proxy(u, self.s)
        if k == "Xsb":
            return xsb_norm(u, self.s, self.b, self.window)
        if k == "Zs":
            return zs_norm(u, self.s, self.grid_size)
        return zs_prime(u, self.s, self.grid_size)

    def to_dict(self) -> dict:
        return asdict(self)


# ----------------------------------------------------------------------------
# Sobolev and mixed Lebesgue norms


def hs_norm(u: FourierField, s: float) -> float:
    """``(2pi)^{d/2} (sum <n>^{2s} |u_hat(n)|^2)^{1/2}``."""
    spec = u.spec
    return float((2 * np.pi) ** (spec.d / 2) * np.sqrt(np.sum(spec.bracket ** (2 * s) * np.abs(u.coeffs) ** 2)))


def _frame_lq(phys: np.ndarray, q: float, d: int) -> np.ndarray:
    axes = tuple(range(1, phys.ndim))
    a = np.abs(phys)
    if math.isinf(q):
        return np.max(a, axis=axes)
    cell = (2 * np.pi / phys.shape[-1]) ** d
    return (cell * np.sum(a ** q, axis=axes)) ** (1 / q)


def spatial_lq_norms(u: SpaceTimeField, q, grid_size: int | None = None, chunk: int = 32) -> np.ndarray:
    """``||u(t_k)||_{L^q_x}`` for every frame, by the rectangle rule on a uniform ``G^d`` grid."""
    q = _exponent(q)
    spec = u.spec
    G = grid_size or product_grid_size(spec.M)
    out = np.empty(len(u))
    for a in range(0, len(u), chunk):
        phys = to_physical_array(u.coeffs[a:a + chunk], spec.d, spec.M, G)
        out[a:a + chunk] = _frame_lq(phys, q, spec.d)
    return out


def time_lp(values: np.ndarray, times: np.ndarray, p) -> float:
    """``(int |f|^p dt)^{1/p}`` by the trapezoid rule; ``p = inf`` is the max."""
    p = _exponent(p)
    values = np.abs(np.asarray(values, dtype=float))
    if math.isinf(p):
        return float(np.max(values))
    if values.size == 1:
        return 0.0
    return float(np.trapezoid(values ** p, times) ** (1 / p))


def lp_lq_norm(u: SpaceTimeField, p, q, grid_size: int | None = None) -> float:
    """``(int_0^delta ||u(t)||_{L^q_x}^p dt)^{1/p}``: trapezoid in time, rectangle rule in space.

    The spatial rule is exact for even integer ``q`` whenever ``G >= q M + 1``;
    the default grid ``G >= 4M + 1`` covers ``q <= 4``.
    """
    return time_lp(spatial_lq_norms(u, q, grid_size), u.times, p)


# ----------------------------------------------------------------------------
# p-variation


def vp_variation(path, p=2.0) -> float:
    """Exact ``V^p`` variation of a sampled path over all partitions of its grid.

    ``path`` has shape ``(T+1,)`` or ``(T+1, ...)``; trailing axes form the vector
    (Euclidean norm).  ``best[j]`` is the largest ``sum |x_{k_i} - x_{k_{i-1}}|^p``
    over chains ending at node ``j``; the recursion is ``O(T^2)``.
    """
    p = _exponent(p)
    if math.isinf(p):
        raise ValueError("p must be finite")
    x = np.asarray(path)
    x = x.reshape(x.shape[0], -1)
    n = x.shape[0]
    best = np.zeros(n)
    for j in range(1, n):
        jumps = np.linalg.norm(x[j] - x[:j], axis=1) ** p
        best[j] = np.max(best[:j] + jumps)
    return float(np.max(best) ** (1 / p))


def vp_variation_modes(paths: np.ndarray, p=2.0) -> np.ndarray:
    """``V^p`` of many scalar paths at once; ``paths`` has shape ``(T+1, K)``."""
    p = _exponent(p)
    x = np.asarray(paths)
    n = x.shape[0]
    best = np.zeros(x.shape)
    for j in range(1, n):
        best[j] = np.max(best[:j] + np.abs(x[j] - x[:j]) ** p, axis=0)
    return np.max(best, axis=0) ** (1 / p)


def _twisted(u: SpaceTimeField) -> np.ndarray:
    """Interaction-picture path ``e^{it|n|^2} u_hat(t)(n)``."""
    return u.coeffs * np.conj(propagator_phase(u.spec, u.times))


def xs_proxy(u: SpaceTimeField, s: float, chunk: int = 4096) -> float:
    """``(sum_n <n>^{2s} V^2(e^{it|n|^2} u_hat(t)(n))^2)^{1/2}``, a lower-bound proxy for ``X^s``.

    The variation runs over partitions of the sampling grid only.
    """
    spec = u.spec
    psi = _twisted(u).reshape(len(u), -1)
    w = spec.bracket.reshape(-1) ** (2 * s)
    total = 0.0
    for a in range(0, psi.shape[1], chunk):
        v = vp_variation_modes(psi[:, a:a + chunk], 2.0)
        total += float(np.sum(w[a:a + chunk] * v ** 2))
    return math.sqrt(total)


# ----------------------------------------------------------------------------
# X^{s,b}


def time_window(steps: int, policy: str = "taper"):
    """Weights for the ``4 delta`` periodic extension of ``steps + 1`` samples.

    Returns ``(data_weights, left_ramp, right_ramp, period)``.  ``taper`` keeps the
    data, continues the endpoint values by raised-cosine ramps of length ``delta``
    and pads with zeros; ``zero`` pads with zeros and weights the endpoints by
    ``1/sqrt(2)`` so the discrete energy equals the trapezoid rule.
    """
    if policy not in WINDOWS:
        raise ValueError(f"window must be one of {WINDOWS}")
    T = int(steps)
    w = np.ones(T + 1)
    if policy == "zero":
        w[0] = w[-1] = math.sqrt(0.5)
        ramp = np.zeros(T)
    else:
        ramp = 0.5 * (1 + np.cos(np.pi * np.arange(1, T + 1) / T))  # 1 -> 0 over (0, delta]
    return w, ramp[::-1].copy(), ramp.copy(), 4 * T


def extended_path(psi: np.ndarray, policy: str = "taper") -> np.ndarray:
    """Place the time axis of ``psi`` on the ``4 delta`` window (node ``m`` sits at ``t_0 + (m - T) dt``)."""
    T = psi.shape[0] - 1
    if T < 1:
        raise ValueError("need at least two time nodes")
    w, left, right, P = time_window(T, policy)
    ext = np.zeros((P,) + psi.shape[1:], dtype=complex)
    shape = (-1,) + (1,) * (psi.ndim - 1)
    ext[T:2 * T + 1] = psi * w.reshape(shape)
    ext[:T] = psi[0] * left.reshape(shape)
    ext[2 * T + 1:3 * T + 1] = psi[-1] * right.reshape(shape)
    return ext


def xsb_norm(u: SpaceTimeField, s: float, b: float, window: str = "taper") -> float:
    """``(2pi)^{d/2} || <n>^s <lambda + |n|^2>^b u_hat(n, lambda) ||_{l^2_n L^2_lambda}`` on a periodic window.

    The time transform acts on the twisted path, whose frequency is ``lambda + |n|^2``;
    ``L^2_lambda`` carries the measure ``d lambda / 2pi`` so that ``b = 0`` is Parseval.
    """
    if not u.uniform:
        raise ValueError("xsb_norm needs a uniform time grid")
    if len(u) < 2:
        raise ValueError("xsb_norm needs at least two time nodes")
    spec = u.spec
    dt = float(u.times[1] - u.times[0])
    psi = _twisted(u).reshape(len(u), -1)
    ext = extended_path(psi, window)
    P = ext.shape[0]
    Y = dt * sfft.fft(ext, axis=0)
    lam = 2 * np.pi * sfft.fftfreq(P, dt)
    lw = (1 + lam ** 2) ** b
    per_mode = (lw[:, None] * np.abs(Y) ** 2).sum(axis=0) / (P * dt)
    total = np.sum(spec.bracket.reshape(-1) ** (2 * s) * per_mode)
    return float(math.sqrt((2 * np.pi) ** spec.d * total))


def window_hb_norm(steps: int, dt: float, b: float, policy: str = "taper") -> float:
    """``H^b`` norm (same discrete measure as ``xsb_norm``) of the extension of the constant path 1."""
    ext = extended_path(np.ones(steps + 1, dtype=complex), policy)
    P = ext.shape[0]
    Y = dt * sfft.fft(ext)
    lam = 2 * np.pi * sfft.fftfreq(P, dt)
    return float(math.sqrt(np.sum((1 + lam ** 2) ** b * np.abs(Y) ** 2) / (P * dt)))


# ----------------------------------------------------------------------------
# Z^s


def zs_terms(u: SpaceTimeField, s: float, grid_size: int | None = None) -> dict:
    """``{N: N^{4s+2-d} ||P_N u||_{L^4(T^d x I)}^4}`` over the dyadic blocks of the lattice.

    The sup over subintervals ``J`` is taken at ``J = I``: the ``L^4`` integral over
    ``J`` is nondecreasing in ``J``.
    """
    d = u.spec.d
    out = {}
    for N in u.spec.dyadic_blocks():
        piece = project_dyadic(u, N)
        out[N] = float(N ** (4 * s + 2 - d) * lp_lq_norm(piece, 4, 4, grid_size) ** 4)
    return out


def zs_norm(u: SpaceTimeField, s: float, grid_size: int | None = None) -> float:
    return float(sum(zs_terms(u, s, grid_size).values()) ** 0.25)


def zs_prime(u: SpaceTimeField, s: float, grid_size: int | None = None) -> float:
    """``Z^s ^{3/4} * X^s ^{1/4}`` with the ``V^2`` proxy standing in for ``X^s``."""
    return float(zs_norm(u, s, grid_size) ** 0.75 * xs_proxy(u, s) ** 0.25)


# ----------------------------------------------------------------------------
# tables


def norm_table_csv(rows) -> str:
    """CSV with columns ``kind, s, b, p, q, window, grid_size, M, d, steps, value``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "s", "b", "p", "q", "window", "grid_size", "M", "d", "steps", "value"])
    for ns, u, value in rows:
        w.writerow([ns.kind, "%.17g" % ns.s, "%.17g" % ns.b, "%.17g" % ns.p, "%.17g" % ns.q, ns.window,
                    ns.grid_size or product_grid_size(u.spec.M), u.spec.M, u.spec.d, len(u) - 1, "%.17g" % value])
    return buf.getvalue()
