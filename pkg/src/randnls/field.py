"""Frequency-space fields on the truncated lattice and their physical-space transforms.

Normalization: ``T^d = [0, 2pi)^d`` with plain Lebesgue measure and
``u(x) = sum_n u_hat(n) exp(i n.x)``, so ``||u||_{L^2}^2 = (2pi)^d sum |u_hat|^2``.
Physical grids are uniform with ``G`` points per axis, ``x_j = 2 pi j / G``.
"""
from __future__ import annotations

import csv
import io
import itertools
import struct
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .lattice import LatticeSpec
from .params import ModelParams, critical_regularity, srd  # noqa: F401  (re-exported)

FIELD_CONVENTION = "lex-2pi-v1"
SNAPSHOT_MAGIC = b"RNLSFLD1"
_HEADER = struct.Struct("<8sHHI16scxxxQ")

_workers = 1


def set_workers(n: int) -> None:
    """Thread count handed to scipy.fft (``-1`` means all cores)."""
    global _workers
    _workers = int(n)


def _smooth(n: int, primes=(2, 3, 5, 7, 11)) -> bool:
    for p in primes:
        while n % p == 0:
            n //= p
    return n == 1


def product_grid_size(M: int, degree: int = 3) -> int:
    """Smallest 11-smooth grid that evaluates a degree-``degree`` product alias-free on ``|n_i| <= M``.

    pocketfft has native radix 7 and 11 kernels, so e.g. 33 beats 36 for ``M = 8``.
    """
    n = (degree + 1) * M + 1
    while not _smooth(n):
        n += 1
    return n


def _axis_index(M: int, G: int) -> np.ndarray:
    return np.arange(-M, M + 1) % G


def _slabs(d: int, M: int, G: int):
    """Pairs of (lattice, grid) slice tuples covering ``-M..M`` in FFT order, ``2^d`` of them."""
    pairs = [(slice(M, 2 * M + 1), slice(0, M + 1)), (slice(0, M), slice(G - M, G))]
    for combo in itertools.product(pairs, repeat=d):
        yield tuple(c[0] for c in combo), tuple(c[1] for c in combo)


def embed(coeffs: np.ndarray, d: int, M: int, G: int) -> np.ndarray:
    """Scatter lattice coefficients (trailing ``d`` axes) into an FFT-ordered ``G^d`` array."""
    if G < 2 * M + 1:
        raise ValueError(f"grid size {G} < 2M+1 = {2 * M + 1} would alias")
    lead = coeffs.shape[: coeffs.ndim - d]
    out = np.zeros(lead + (G,) * d, dtype=complex)
    for src, dst in _slabs(d, M, G):
        out[(Ellipsis,) + dst] = coeffs[(Ellipsis,) + src]
    return out


def extract(grid_coeffs: np.ndarray, d: int, M: int) -> np.ndarray:
    G = grid_coeffs.shape[-1]
    out = np.empty(grid_coeffs.shape[: grid_coeffs.ndim - d] + (2 * M + 1,) * d, dtype=complex)
    for dst, src in _slabs(d, M, G):
        out[(Ellipsis,) + dst] = grid_coeffs[(Ellipsis,) + src]
    return out


def to_physical_array(coeffs: np.ndarray, d: int, M: int, G: int) -> np.ndarray:
    axes = tuple(range(-d, 0))
    return sfft.ifftn(embed(coeffs, d, M, G), axes=axes, norm="forward", workers=_workers, overwrite_x=True)


def from_physical_array(samples: np.ndarray, d: int, M: int) -> np.ndarray:
    axes = tuple(range(-d, 0))
    return extract(sfft.fftn(samples, axes=axes, norm="forward", workers=_workers), d, M)


_CHUNK_POINTS = 1 << 21  # grid points per batch chunk, keeps temporaries near 32 MB


def triple_product_array(c1, c2, c3, d: int, M: int, conj2: bool = True, G: int | None = None):
    """Coefficients of ``v1 * (conj v2 | v2) * v3`` on ``|n_i| <= M``; arrays may carry leading batch axes."""
    if G is None:
        G = product_grid_size(M)
    elif G < 4 * M + 1:
        raise ValueError(f"grid size {G} < 4M+1 aliases the cubic product")
    c1, c2, c3 = np.broadcast_arrays(c1, c2, c3)
    lead = c1.shape[: c1.ndim - d]
    if lead:
        flat = [c.reshape((-1,) + c.shape[-d:]) for c in (c1, c2, c3)]
        out = np.empty(flat[0].shape, dtype=complex)
        step = max(1, _CHUNK_POINTS // G ** d)
        for a in range(0, out.shape[0], step):
            out[a:a + step] = _triple_chunk(*(f[a:a + step] for f in flat), d, M, conj2, G)
        return out.reshape(lead + out.shape[1:])
    return _triple_chunk(c1, c2, c3, d, M, conj2, G)


def _triple_chunk(c1, c2, c3, d, M, conj2, G):
    p1 = to_physical_array(c1, d, M, G)
    s12 = c2 is c1 or _same_view(c1, c2)
    s13 = c3 is c1 or _same_view(c1, c3)
    if s12 and s13 and conj2:
        prod = p1 * (p1.real ** 2 + p1.imag ** 2)
    else:
        p2 = p1 if s12 else to_physical_array(c2, d, M, G)
        p3 = p1 if s13 else (p2 if _same_view(c2, c3) else to_physical_array(c3, d, M, G))
        prod = p1 * (np.conj(p2) if conj2 else p2) * p3
    return from_physical_array(prod, d, M)


def _same_view(a, b) -> bool:
    return (a.shape == b.shape and a.strides == b.strides
            and a.__array_interface__["data"][0] == b.__array_interface__["data"][0])


def flip_modes(coeffs: np.ndarray, d: int) -> np.ndarray:
    """``n -> -n`` on the trailing ``d`` axes."""
    return coeffs[(Ellipsis,) + (slice(None, None, -1),) * d]


@dataclass(frozen=True, eq=False)
class FourierField:
    spec: LatticeSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != self.spec.shape:
            if c.size == self.spec.size:
                c = c.reshape(self.spec.shape)
            else:
                raise ValueError(f"coefficient shape {c.shape} does not match lattice {self.spec.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, spec: LatticeSpec) -> "FourierField":
        return cls(spec, np.zeros(spec.shape, dtype=complex))

    @classmethod
    def single_mode(cls, spec: LatticeSpec, n, value: complex = 1.0) -> "FourierField":
        c = np.zeros(spec.shape, dtype=complex)
        c[spec.index_of(n)] = value
        return cls(spec, c)

    @classmethod
    def from_physical(cls, samples, spec: LatticeSpec) -> "FourierField":
        samples = np.asarray(samples)
        if samples.ndim != spec.d:
            raise ValueError("sample array must have one axis per dimension")
        return cls(spec, from_physical_array(samples, spec.d, spec.M))

    def __getitem__(self, n) -> complex:
        return complex(self.coeffs[self.spec.index_of(n)])

    def _like(self, coeffs) -> "FourierField":
        return FourierField(self.spec, coeffs)

    def __add__(self, other):
        return self._like(self.coeffs + _coeffs_of(other, self.spec))

    def __sub__(self, other):
        return self._like(self.coeffs - _coeffs_of(other, self.spec))

    def __neg__(self):
        return self._like(-self.coeffs)

    def __mul__(self, scalar):
        return self._like(self.coeffs * complex(scalar))

    __rmul__ = __mul__

    def conj(self) -> "FourierField":
        """The field ``conj(u(x))``: coefficient ``conj(u_hat(-n))``."""
        return self._like(np.conj(flip_modes(self.coeffs, self.spec.d)))

    def masked(self, mask) -> "FourierField":
        return self._like(np.where(mask, self.coeffs, 0))

    def flat(self) -> np.ndarray:
        return self.coeffs.ravel()

    def l2_norm(self) -> float:
        return float(np.sqrt((2 * np.pi) ** self.spec.d * np.sum(np.abs(self.coeffs) ** 2)))

    def to_physical(self, grid_size: int) -> np.ndarray:
        return to_physical_array(self.coeffs, self.spec.d, self.spec.M, grid_size)


def _coeffs_of(other, spec):
    if isinstance(other, FourierField):
        if other.spec != spec:
            raise ValueError("fields live on different lattices")
        return other.coeffs
    return np.asarray(other)


def to_physical(u: FourierField, grid_size: int) -> np.ndarray:
    """Samples of ``sum_n u_hat(n) e^{i n.x}`` on the uniform ``grid_size^d`` grid."""
    return u.to_physical(grid_size)


def from_physical(samples, spec: LatticeSpec) -> FourierField:
    return FourierField.from_physical(samples, spec)


def _shared_spec(*fields) -> LatticeSpec:
    spec = fields[0].spec
    if any(f.spec != spec for f in fields[1:]):
        raise ValueError("fields live on different lattices")
    return spec


def triple_product(v1: FourierField, v2: FourierField, v3: FourierField,
                   conj2: bool = True, grid_size: int | None = None) -> FourierField:
    """Alias-free coefficients of ``v1 * conj(v2) * v3`` (or ``v1 v2 v3`` when ``conj2`` is False)."""
    spec = _shared_spec(v1, v2, v3)
    c2 = v2.coeffs
    c = triple_product_array(v1.coeffs, c2, v3.coeffs, spec.d, spec.M, conj2, grid_size)
    return FourierField(spec, c)


def inner_integral(v2: FourierField, v3: FourierField, conj2: bool = True) -> complex:
    """``int_{T^d} conj(v2) v3 dx`` (or ``v2 v3`` without conjugation)."""
    spec = _shared_spec(v2, v3)
    vol = (2 * np.pi) ** spec.d
    if conj2:
        return complex(vol * np.vdot(v2.coeffs, v3.coeffs))
    return complex(vol * np.sum(flip_modes(v2.coeffs, spec.d) * v3.coeffs))


def direct_convolution(v1: FourierField, v2: FourierField, v3: FourierField, conj2: bool = True) -> FourierField:
    """O(size^3) mode-by-mode convolution; a reference for tiny lattices only."""
    spec = _shared_spec(v1, v2, v3)
    if spec.size ** 2 > 5_000_000:
        raise ValueError("direct convolution is for tiny lattices only")
    modes = spec.modes
    a, b, c = v1.flat(), v2.flat(), v3.flat()
    if conj2:
        b = np.conj(b)
        sgn = -1
    else:
        sgn = 1
    out = np.zeros(spec.size, dtype=complex)
    M = spec.M
    for i in np.flatnonzero(a):
        for j in np.flatnonzero(b):
            partial = modes[i] + sgn * modes[j]
            n = partial[None, :] + modes
            ok = np.all(np.abs(n) <= M, axis=1) & (c != 0)
            if not np.any(ok):
                continue
            idx = np.ravel_multi_index(tuple((n[ok] + M).T), spec.shape)
            np.add.at(out, idx, a[i] * b[j] * c[ok])
    return FourierField(spec, out)


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Frames ``u(t_k)`` on a time grid, stored as one ``(T+1, *spec.shape)`` array."""

    spec: LatticeSpec
    times: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        c = np.array(self.coeffs, dtype=complex)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("time grid must be a non-empty 1-d array")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if c.shape != (t.size,) + self.spec.shape:
            raise ValueError(f"frames shape {c.shape} does not match {(t.size,) + self.spec.shape}")
        t.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_frames(cls, times, frames) -> "SpaceTimeField":
        spec = _shared_spec(*frames)
        return cls(spec, times, np.stack([f.coeffs for f in frames]))

    @classmethod
    def zeros(cls, spec: LatticeSpec, times) -> "SpaceTimeField":
        return cls(spec, times, np.zeros((len(times),) + spec.shape, dtype=complex))

    def __len__(self) -> int:
        return self.times.size

    @property
    def delta(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def uniform(self) -> bool:
        if self.times.size < 3:
            return True
        h = np.diff(self.times)
        return bool(np.allclose(h, h[0], rtol=1e-9, atol=0))

    def frame(self, k: int) -> FourierField:
        return FourierField(self.spec, self.coeffs[k])

    def frames(self):
        return [self.frame(k) for k in range(len(self))]

    def masked(self, mask) -> "SpaceTimeField":
        return SpaceTimeField(self.spec, self.times, np.where(mask, self.coeffs, 0))

    def _like(self, coeffs) -> "SpaceTimeField":
        return SpaceTimeField(self.spec, self.times, coeffs)

    def __add__(self, other):
        return self._like(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self._like(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return self._like(self.coeffs * complex(scalar))

    __rmul__ = __mul__

    def l2_norms(self) -> np.ndarray:
        vol = (2 * np.pi) ** self.spec.d
        axes = tuple(range(1, self.coeffs.ndim))
        return np.sqrt(vol * np.sum(np.abs(self.coeffs) ** 2, axis=axes))

    def to_physical(self, grid_size: int) -> np.ndarray:
        return to_physical_array(self.coeffs, self.spec.d, self.spec.M, grid_size)


# ----------------------------------------------------------------------------
# snapshots


def write_snapshot(u: FourierField, fh) -> None:
    """Binary snapshot: fixed header then little-endian float64 (re, im) pairs, lexicographic."""
    flat = u.flat()
    header = _HEADER.pack(SNAPSHOT_MAGIC, 1, u.spec.d, u.spec.M,
                          FIELD_CONVENTION.encode().ljust(16, b"\0"), b"<", flat.size)
    fh.write(header)
    pairs = np.empty(2 * flat.size, dtype="<f8")
    pairs[0::2] = flat.real
    pairs[1::2] = flat.imag
    fh.write(pairs.tobytes())


def read_snapshot(fh) -> FourierField:
    raw = fh.read(_HEADER.size)
    magic, version, d, M, tag, endian, count = _HEADER.unpack(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError("not a field snapshot")
    if version != 1 or endian != b"<":
        raise ValueError(f"unsupported snapshot version {version} / endianness {endian!r}")
    if tag.rstrip(b"\0").decode() != FIELD_CONVENTION:
        raise ValueError(f"unknown field convention {tag!r}")
    spec = LatticeSpec(d, M)
    if count != spec.size:
        raise ValueError("snapshot length does not match its header")
    pairs = np.frombuffer(fh.read(16 * count), dtype="<f8")
    return FourierField(spec, (pairs[0::2] + 1j * pairs[1::2]).reshape(spec.shape))


def snapshot_bytes(u: FourierField) -> bytes:
    buf = io.BytesIO()
    write_snapshot(u, buf)
    return buf.getvalue()


def modes_csv(u: FourierField) -> str:
    """CSV of ``|u_hat(n)|`` per mode (17 significant digits)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"n{i + 1}" for i in range(u.spec.d)] + ["abs"])
    for n, a in zip(u.spec.modes, np.abs(u.flat())):
        w.writerow([int(v) for v in n] + ["%.17g" % a])
    return buf.getvalue()
