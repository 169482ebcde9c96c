"""Truncated frequency lattice, rectangular Littlewood-Paley blocks and cube tilings.

Modes are the points ``n`` of ``Z^d`` with ``|n_i| <= M``.  Coefficient arrays
have shape ``(2M+1,) * d`` and array index ``i`` along an axis corresponds to
frequency ``i - M``; flattening in C order gives lexicographic order in
``(n_1, ..., n_d)``.

Dyadic convention: block ``N = 1`` is ``{|n|_inf <= 1}`` and block ``N = 2^k``
(``k >= 1``) is ``{2^(k-1) < |n|_inf <= 2^k}``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

DYADIC_CONVENTION = "rect-dyadic-v1"


def japanese_bracket(n) -> float:
    """Return ``sqrt(1 + |n|^2)`` for a lattice point (or array of points on the last axis)."""
    n = np.asarray(n, dtype=float)
    return np.sqrt(1.0 + np.sum(n * n, axis=-1))


@dataclass(frozen=True)
class LatticeSpec:
    d: int
    M: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d!r}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"truncation radius must be a positive integer, got {self.M!r}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (2 * self.M + 1,) * self.d

    @property
    def size(self) -> int:
        return (2 * self.M + 1) ** self.d

    @property
    def axis_freqs(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    @cached_property
    def modes(self) -> np.ndarray:
        """All modes as an ``(size, d)`` integer array in lexicographic order."""
        grids = np.meshgrid(*([self.axis_freqs] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def _broadcast_axes(self):
        k = self.axis_freqs
        out = []
        for ax in range(self.d):
            shape = [1] * self.d
            shape[ax] = k.size
            out.append(k.reshape(shape))
        return out

    @cached_property
    def sq_norm(self) -> np.ndarray:
        """``|n|^2`` on the coefficient array shape (integer valued)."""
        out = np.zeros(self.shape, dtype=np.int64)
        for k in self._broadcast_axes():
            out = out + k * k
        return out

    @cached_property
    def sup_norm(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.int64)
        for k in self._broadcast_axes():
            out = np.maximum(out, np.abs(k))
        return out

    @cached_property
    def bracket(self) -> np.ndarray:
        return np.sqrt(1.0 + self.sq_norm)

    def index_of(self, n) -> tuple[int, ...]:
        n = tuple(int(v) for v in n)
        if len(n) != self.d or any(abs(v) > self.M for v in n):
            raise IndexError(f"mode {n} outside lattice d={self.d}, M={self.M}")
        return tuple(v + self.M for v in n)

    def flat_index(self, n) -> int:
        return int(np.ravel_multi_index(self.index_of(n), self.shape))

    def dyadic_blocks(self) -> list[int]:
        """Dyadic scales whose blocks meet the lattice: 1, 2, 4, ..., first 2^k >= M."""
        out = [1]
        while out[-1] < self.M:
            out.append(out[-1] * 2)
        return out

    def block_mask(self, N: int) -> np.ndarray:
        lo, hi = block_range(N)
        return (self.sup_norm > lo) & (self.sup_norm <= hi)

    def to_dict(self) -> dict:
        return {"d": self.d, "M": self.M, "convention": DYADIC_CONVENTION}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "LatticeSpec":
        tag = data.get("convention", DYADIC_CONVENTION)
        if tag != DYADIC_CONVENTION:
            raise ValueError(f"unknown lattice convention {tag!r}")
        return cls(int(data["d"]), int(data["M"]))


def is_dyadic(N) -> bool:
    N = int(N)
    return N >= 1 and (N & (N - 1)) == 0


def block_range(N: int) -> tuple[int, int]:
    """Sup-norm range ``(lo, hi]`` of block ``N``; block 1 also contains the origin."""
    if not is_dyadic(N):
        raise ValueError(f"{N!r} is not a dyadic number")
    if N == 1:
        return (-1, 1)
    return (N // 2, N)


def block_of(n) -> int:
    """Dyadic block containing mode ``n``."""
    s = int(np.max(np.abs(np.asarray(n)))) if np.size(n) else 0
    if s <= 1:
        return 1
    return 1 << (s - 1).bit_length()


def block_modes(d: int, N: int) -> np.ndarray:
    """All points of ``Z^d`` in block ``N`` (no truncation), lexicographic."""
    lo, hi = block_range(N)
    k = np.arange(-hi, hi + 1)
    grids = np.meshgrid(*([k] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    s = np.max(np.abs(pts), axis=1)
    return pts[(s > lo) & (s <= hi)]


def project_dyadic(u, N: int):
    """Littlewood-Paley projection ``P_N`` of a FourierField (or SpaceTimeField)."""
    spec = u.spec
    if N > 2 * spec.M:
        raise ValueError(f"block N={N} exceeds 2M={2 * spec.M}")
    return u.masked(spec.block_mask(N))


def dyadic_decomposition(u) -> dict:
    """Map ``N -> P_N u`` over all blocks meeting the lattice."""
    return {N: project_dyadic(u, N) for N in u.spec.dyadic_blocks()}


@dataclass(frozen=True)
class Cube:
    corner: tuple[int, ...]
    side: int

    def contains(self, n) -> bool:
        return all(c <= v < c + self.side for c, v in zip(self.corner, n))

    def clipped(self, M: int) -> list[tuple[int, int]]:
        """Per-axis inclusive ranges of lattice points inside the cube."""
        return [(max(c, -M), min(c + self.side - 1, M)) for c in self.corner]

    def mask(self, spec: LatticeSpec) -> np.ndarray:
        out = np.ones(spec.shape, dtype=bool)
        k = spec.axis_freqs
        for ax, (a, b) in enumerate(self.clipped(spec.M)):
            shape = [1] * spec.d
            shape[ax] = k.size
            out = out & ((k >= a) & (k <= b)).reshape(shape)
        return out


def cube_decomposition(spec: LatticeSpec, side: int):
    """Tile the truncated lattice by cubes of the given side.

    Returns ``(cubes, adjacency)`` where ``adjacency[j]`` lists the indices
    ``k`` with ``C_j ~ C_k``: the sum set of the two cubes (restricted to the
    lattice) meets the box ``|n_i| <= 2 * side``.
    """
    if side < 1:
        raise ValueError("cube side must be >= 1")
    per_axis = math.ceil((2 * spec.M + 1) / side)
    starts = [-spec.M + side * j for j in range(per_axis)]
    cubes = [Cube(tuple(c), side) for c in itertools.product(starts, repeat=spec.d)]
    ranges = np.array([c.clipped(spec.M) for c in cubes])  # (K, d, 2)
    lo = ranges[:, None, :, 0] + ranges[None, :, :, 0]
    hi = ranges[:, None, :, 1] + ranges[None, :, :, 1]
    reach = 2 * side
    adj = np.all((hi >= -reach) & (lo <= reach), axis=-1)
    adjacency = [np.flatnonzero(row).tolist() for row in adj]
    return cubes, adjacency
