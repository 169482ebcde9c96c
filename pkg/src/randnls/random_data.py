"""Seeded Gaussian randomization of the initial data.

``phi^omega(x) = sum_n g_n(omega) <n>^{-(d-1-alpha)} e^{i n.x}`` with
``g_n`` i.i.d. standard complex Gaussians, ``E g_n = 0``, ``E|g_n|^2 = 1``.

Draws come from Philox-4x64 keyed by the seed.  Mode with flat index ``i``
reads counter block ``i`` (four 64-bit words, two used) and is mapped to a
complex Gaussian by Box-Muller, so any mode can be regenerated on its own and
the draw does not depend on evaluation order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import FourierField
from .lattice import LatticeSpec
from .params import ModelParams

GENERATOR_VERSION = "philox4x64-boxmuller-v1"
_TWO_NEG_53 = 2.0 ** -53


def _bitgen(seed: int) -> np.random.Philox:
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.Philox(key=seed)


def _words_to_gaussian(w0: np.ndarray, w1: np.ndarray) -> np.ndarray:
    u1 = ((w0 >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_NEG_53  # (0, 1]
    u2 = (w1 >> np.uint64(11)).astype(np.float64) * _TWO_NEG_53  # [0, 1)
    return np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u2)


def complex_gaussians(seed: int, count: int) -> np.ndarray:
    """The first ``count`` standard complex Gaussians of stream ``seed``."""
    raw = _bitgen(seed).random_raw(4 * count).reshape(count, 4)
    return _words_to_gaussian(raw[:, 0], raw[:, 1])


def gaussian_at(seed: int, indices) -> np.ndarray:
    """Gaussians for selected flat indices, generated independently of the others."""
    out = []
    for i in np.atleast_1d(indices):
        bg = _bitgen(seed)
        bg.advance(int(i))
        w = bg.random_raw(4)
        out.append(_words_to_gaussian(w[:1], w[1:2])[0])
    return np.array(out)


def gaussian_matrix(seed: int, rows: int, cols: int) -> np.ndarray:
    """``rows x cols`` array of independent complex Gaussians from one stream."""
    return complex_gaussians(seed, rows * cols).reshape(rows, cols)


@dataclass(frozen=True, eq=False)
class GaussianDraw:
    seed: int
    g: np.ndarray

    @classmethod
    def generate(cls, spec: LatticeSpec, seed: int) -> "GaussianDraw":
        return cls(int(seed), complex_gaussians(seed, spec.size).reshape(spec.shape))

    @classmethod
    def zeros(cls, spec: LatticeSpec, seed: int = 0) -> "GaussianDraw":
        """All coefficients forced to zero (used for zero-data runs)."""
        return cls(int(seed), np.zeros(spec.shape, dtype=complex))


@dataclass(frozen=True, eq=False)
class RandomField:
    params: ModelParams
    draw: GaussianDraw
    field: FourierField


def bracket_weights(params: ModelParams) -> np.ndarray:
    return params.spec.bracket ** (-params.decay)


def deterministic_profile(params: ModelParams) -> FourierField:
    """Coefficients ``<n>^{-(d-1-alpha)}`` on the lattice."""
    return FourierField(params.spec, bracket_weights(params))


def sample(params: ModelParams, seed: int, zero: bool = False) -> RandomField:
    spec = params.spec
    draw = GaussianDraw.zeros(spec, seed) if zero else GaussianDraw.generate(spec, seed)
    return RandomField(params, draw, FourierField(spec, draw.g * bracket_weights(params)))


def from_draw(params: ModelParams, draw: GaussianDraw) -> RandomField:
    return RandomField(params, draw, FourierField(params.spec, draw.g * bracket_weights(params)))


def expected_hs_norm_sq(params: ModelParams, sigma: float, M: int | None = None) -> float:
    """Closed form ``E ||phi^omega||_{H^sigma}^2 = (2pi)^d sum_{|n_i|<=M} <n>^{2 sigma - 2(d-1-alpha)}``."""
    spec = LatticeSpec(params.d, params.M if M is None else M)
    return float((2 * np.pi) ** params.d * np.sum(spec.bracket ** (2 * sigma - 2 * params.decay)))


def tail_hs_norm_sq(params: ModelParams, sigma: float, M_outer: int) -> float:
    """Expected ``H^sigma`` mass between the truncation ``M`` and ``M_outer`` (a truncation report)."""
    return expected_hs_norm_sq(params, sigma, M_outer) - expected_hs_norm_sq(params, sigma)
