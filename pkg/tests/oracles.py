"""Independent reference computations used by the tests (no FFTs, no dynamic programming)."""

import numpy as np


def synth(coeffs: np.ndarray, M: int, G: int) -> np.ndarray:
    """Physical samples of a trigonometric polynomial by explicit exponential sums."""
    x = 2 * np.pi * np.arange(G) / G
    E = np.exp(1j * np.outer(np.arange(-M, M + 1), x))
    out = coeffs
    for _ in range(coeffs.ndim):
        out = np.tensordot(out, E, axes=([0], [0]))
    return out


def lq_quadrature(coeffs: np.ndarray, M: int, q: float, G: int) -> float:
    d = coeffs.ndim
    vals = np.abs(synth(coeffs, M, G)) ** q
    return float(((2 * np.pi / G) ** d * vals.sum()) ** (1 / q))


def vp_exhaustive(path, p: float) -> float:
    """Max over every subset (size >= 2) of the sample nodes of ``sum |x_{k+1} - x_k|^p``."""
    x = np.asarray(path)
    x = x.reshape(x.shape[0], -1)
    n = x.shape[0]
    J = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2) ** p
    best = 0.0
    for mask in range(1, 1 << n):
        idx = [i for i in range(n) if mask >> i & 1]
        if len(idx) < 2:
            continue
        best = max(best, sum(J[a, b] for a, b in zip(idx, idx[1:])))
    return best ** (1 / p)




def r3_table(A_max: int) -> list:
    """Representations as x^2 + y^2 + z^2 by sorted triples 0 <= x <= y <= z and symmetry counts."""
    from itertools import permutations
    out = [0] * (A_max + 1)
    z_max = int(A_max ** 0.5)
    for z in range(z_max + 1):
        for y in range(z + 1):
            for x in range(y + 1):
                A = x * x + y * y + z * z
                if A > A_max:
                    break
                perms = len(set(permutations((x, y, z))))
                signs = 2 ** sum(1 for v in (x, y, z) if v)
                out[A] += perms * signs
    return out
