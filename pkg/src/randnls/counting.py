"""Exact lattice-point counts, resonance sets and two small analytic bounds.

Every count is an exact integer obtained by enumeration; most queries have two
independent strategies so that corpora can be cross-checked.  Enumerations are
capped by a budget on the number of candidate evaluations and refuse with a
cost estimate instead of truncating.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .lattice import block_modes, block_range

EPSILON = 0.1
DEFAULT_BUDGET = 1 << 27
PATTERNS = ("conj1", "conj2")
KINDS = ("sphere", "sum_of_squares", "ball_plane", "bilinear_level_set", "resonance")


class BudgetExceeded(RuntimeError):
    """Enumeration would exceed its budget; ``cost`` is the estimated number of candidates."""

    def __init__(self, what: str, cost: int, budget: int):
        super().__init__(f"{what}: estimated {cost} candidate evaluations exceeds budget {budget}")
        self.cost = int(cost)
        self.budget = int(budget)


class ConvergenceFailure(RuntimeError):
    pass


def _check_budget(what, cost, budget):
    if budget is not None and cost > budget:
        raise BudgetExceeded(what, cost, budget)


def _box(d: int, R: int) -> np.ndarray:
    """All points of ``[-R, R]^d`` as a ``(K, d)`` int64 array."""
    ax = np.arange(-R, R + 1, dtype=np.int64)
    return np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)


# ----------------------------------------------------------------------------
# sums of squares and spheres


def sum_of_squares_table(d: int, A_max: int, method: str = "enumerate", budget=DEFAULT_BUDGET) -> np.ndarray:
    """``r_d(A)`` for ``A = 0..A_max``.

    ``enumerate`` histograms ``|X|^2`` over the cube ``|X_i| <= sqrt(A_max)``;
    ``theta`` convolves the one-dimensional theta series ``d`` times.
    """
    if d < 1 or A_max < 0:
        raise ValueError("need d >= 1 and A_max >= 0")
    R = math.isqrt(A_max)
    if method == "enumerate":
        _check_budget("sum_of_squares", (2 * R + 1) ** d, budget)
        table = np.zeros(A_max + 1, dtype=np.int64)
        tail = np.sum(_box(d - 1, R) ** 2, axis=1) if d > 1 else np.zeros(1, dtype=np.int64)
        for x in range(-R, R + 1):  # one slab per leading coordinate
            sq = tail + x * x
            table += np.bincount(sq[sq <= A_max], minlength=A_max + 1)
        return table
    if method == "theta":
        theta = np.zeros(A_max + 1, dtype=np.int64)
        theta[0] = 1
        for x in range(1, R + 1):
            theta[x * x] += 2
        out = np.array([1], dtype=np.int64)
        for _ in range(d):
            out = np.convolve(out, theta)[: A_max + 1]
        return np.pad(out, (0, A_max + 1 - out.size))
    raise ValueError(f"unknown method {method!r}")


def count_sum_of_squares(d: int, A: int, budget=DEFAULT_BUDGET) -> int:
    """``#{X in Z^d : X_1^2 + ... + X_d^2 = A}`` by direct enumeration of the cube ``|X_i| <= sqrt(A)``."""
    A = int(A)
    if A < 0:
        raise ValueError("A must be >= 0")
    R = math.isqrt(A)
    _check_budget("sum_of_squares", (2 * R + 1) ** d, budget)
    count = 0
    # enumerate the first d-1 coordinates, solve for the last
    head = _box(d - 1, R) if d > 1 else np.zeros((1, 0), dtype=np.int64)
    rest = A - np.sum(head ** 2, axis=1)
    ok = rest >= 0
    root = np.floor(np.sqrt(np.where(ok, rest, 0))).astype(np.int64)
    for r in (root - 1, root, root + 1):
        hit = ok & (r >= 0) & (r * r == rest)
        count += int(np.sum(np.where(r[hit] == 0, 1, 2)))
    return count


def _radius_sq(R) -> int | None:
    """``R^2`` as an integer when it is one (up to rounding), else ``None``."""
    if isinstance(R, Fraction):
        R2 = R * R
        return int(R2) if R2.denominator == 1 else None
    R2 = float(R) ** 2
    A = round(R2)
    return int(A) if abs(R2 - A) <= 1e-9 * max(1.0, R2) else None


def count_sphere(d: int, R, budget=DEFAULT_BUDGET) -> int:
    """``|Z^d cap S_R|``; zero unless ``R^2`` is an integer."""
    if R < 0:
        raise ValueError("radius must be >= 0")
    A = _radius_sq(R)
    return 0 if A is None else count_sum_of_squares(d, A, budget)


def count_ball_plane(d: int, r, normal, offset, method: str = "filter", budget=DEFAULT_BUDGET) -> int:
    """``|Z^d cap B_r cap P|`` with ``P = {x : normal . x = offset}`` and ``B_r`` the closed Euclidean ball.

    ``filter`` enumerates the ball and tests the plane; ``solve`` enumerates ``d - 1``
    coordinates and solves the plane equation for the remaining one.
    """
    if r < 0:
        raise ValueError("radius must be >= 0")
    normal = [Fraction(x) for x in normal]
    if len(normal) != d or all(x == 0 for x in normal):
        raise ValueError("normal must be a nonzero vector of length d")
    offset = Fraction(offset)
    # clear denominators so the arithmetic is in integers
    den = math.lcm(*(x.denominator for x in normal + [offset]))
    a = np.array([int(x * den) for x in normal], dtype=np.int64)
    c = int(offset * den)
    R = int(math.floor(float(r)))
    r2 = Fraction(r) ** 2 if not isinstance(r, float) else Fraction(r).limit_denominator(10 ** 12) ** 2
    if method == "filter":
        _check_budget("ball_plane", (2 * R + 1) ** d, budget)
        pts = _box(d, R)
        sq = np.sum(pts ** 2, axis=1)
        inside = sq * r2.denominator <= r2.numerator
        return int(np.sum(inside & (pts @ a == c)))
    if method == "solve":
        j = int(np.flatnonzero(a)[-1])
        others = [i for i in range(d) if i != j]
        _check_budget("ball_plane", (2 * R + 1) ** (d - 1), budget)
        count = 0
        for head in itertools.product(range(-R, R + 1), repeat=d - 1):
            num = c - sum(int(a[i]) * x for i, x in zip(others, head))
            if num % int(a[j]):
                continue
            xj = num // int(a[j])
            sq = sum(x * x for x in head) + xj * xj
            if sq * r2.denominator <= r2.numerator:
                count += 1
        return count
    raise ValueError(f"unknown method {method!r}")


# ----------------------------------------------------------------------------
# bilinear level sets


def _block_points(d: int, N: int) -> np.ndarray:
    return block_modes(d, N).astype(np.int64)


def bilinear_level_counts(d: int, n2, N1: int, N3: int, budget=DEFAULT_BUDGET) -> dict:
    """``{mu: |S(n2)|}`` for every attained ``mu``, with ``n1, n3`` in the sup-norm blocks ``N1, N3``."""
    n2 = np.asarray(n2, dtype=np.int64)
    B1, B3 = _block_points(d, N1), _block_points(d, N3)
    _check_budget("bilinear_level_set", len(B1) * len(B3), budget)
    a = n2 - B1[np.any(B1 != n2, axis=1)]
    c = n2 - B3[np.any(B3 != n2, axis=1)]
    if len(a) == 0 or len(c) == 0:
        return {}
    dots = (a @ c.T).ravel()
    lo = int(dots.min())
    hist = np.bincount(dots - lo)
    nz = np.flatnonzero(hist)
    return {int(m + lo): int(hist[m]) for m in nz}


def count_bilinear_level_set(d: int, n2, mu: int, N1: int, N3: int, method: str = "vectorized",
                             budget=DEFAULT_BUDGET) -> int:
    """``#{(n1, n3) : n1 in block N1, n3 in block N3, n1 != n2 != n3, <n2 - n1, n2 - n3> = mu}``.

    ``|n_i| ~ N_i`` means membership in the sup-norm dyadic block.  ``loop`` is a
    plain-Python oracle.
    """
    if method == "vectorized":
        return bilinear_level_counts(d, n2, N1, N3, budget).get(int(mu), 0)
    if method == "loop":
        n2 = tuple(int(x) for x in n2)
        B1 = [tuple(map(int, p)) for p in _block_points(d, N1)]
        B3 = [tuple(map(int, p)) for p in _block_points(d, N3)]
        _check_budget("bilinear_level_set", len(B1) * len(B3), budget)
        count = 0
        for p in B1:
            if p == n2:
                continue
            u = [y - x for x, y in zip(p, n2)]
            for q in B3:
                if q != n2 and sum(ui * (y - x) for ui, x, y in zip(u, q, n2)) == mu:
                    count += 1
        return count
    raise ValueError(f"unknown method {method!r}")


def bilinear_bound(d: int, N1: int, N3: int, eps: float = EPSILON) -> float:
    return float(N1 ** (d - 1) * N3 ** (d - 1) * min(N1, N3) ** eps)


# ----------------------------------------------------------------------------
# resonance sets


def _phase(pattern):
    if pattern not in PATTERNS:
        raise ValueError(f"pattern must be one of {PATTERNS}")
    # sign of each slot in the frequency relation sum_i s_i n_i = n
    return (-1, 1, 1) if pattern == "conj1" else (1, -1, 1)


def resonance_set(d: int, n, m: int, N1: int, N2: int, N3: int, pattern: str = "conj1",
                  method: str = "direct", budget=DEFAULT_BUDGET) -> list:
    """Sorted triples ``(n1, n2, n3)`` in the blocks ``N1, N2, N3`` with

    ``conj1``: ``-n1 + n2 + n3 = n``, ``-|n1|^2 + |n2|^2 + |n3|^2 = m``, ``n1 != n2, n3``;
    ``conj2``: ``n1 - n2 + n3 = n``, ``|n1|^2 - |n2|^2 + |n3|^2 = m``, ``n2 != n1, n3``.

    ``direct`` solves the linear relation for the conjugated slot; ``hash`` joins
    the two unconjugated slots on ``(sum, energy)``.
    """
    sg = _phase(pattern)
    n = np.asarray(n, dtype=np.int64)
    B = [_block_points(d, N) for N in (N1, N2, N3)]
    k = sg.index(-1)  # conjugated slot
    free = [i for i in range(3) if i != k]
    cost = len(B[free[0]]) * len(B[free[1]])
    _check_budget("resonance_set", cost, budget)
    out = []
    if method == "direct":
        P = B[free[0]][:, None, :]
        Q = B[free[1]][None, :, :]
        nk = (P + Q - n[None, None, :]).reshape(-1, d)  # n_k = n_a + n_b - n
        PP = np.broadcast_to(P, (len(B[free[0]]), len(B[free[1]]), d)).reshape(-1, d)
        QQ = np.broadcast_to(Q, (len(B[free[0]]), len(B[free[1]]), d)).reshape(-1, d)
        lo, hi = block_range(N1 if k == 0 else N2)
        sup = np.max(np.abs(nk), axis=1)
        ok = (sup > lo) & (sup <= hi)
        energy = np.sum(PP ** 2, axis=1) + np.sum(QQ ** 2, axis=1) - np.sum(nk ** 2, axis=1)
        ok &= energy == m
        ok &= np.any(nk != PP, axis=1) & np.any(nk != QQ, axis=1)
        for a, b, c in zip(PP[ok], QQ[ok], nk[ok]):
            slots = [None, None, None]
            slots[free[0]], slots[free[1]], slots[k] = a, b, c
            out.append(tuple(tuple(int(x) for x in s) for s in slots))
    elif method == "hash":
        table = defaultdict(list)
        for a in map(tuple, B[free[0]].tolist()):
            for b in map(tuple, B[free[1]].tolist()):
                key = (tuple(x + y for x, y in zip(a, b)), sum(x * x for x in a) + sum(y * y for y in b))
                table[key].append((a, b))
        nn = tuple(int(x) for x in n)
        for c in map(tuple, B[k].tolist()):
            key = (tuple(x + y for x, y in zip(nn, c)), m + sum(x * x for x in c))
            for a, b in table.get(key, ()):
                if c == a or c == b:
                    continue
                slots = [None, None, None]
                slots[free[0]], slots[free[1]], slots[k] = a, b, c
                out.append(tuple(slots))
    else:
        raise ValueError(f"unknown method {method!r}")
    return sorted(out)


def convolution_count(d: int, n, N1: int, N2: int, N3: int, pattern: str = "conj1") -> int:
    """Triples satisfying only the frequency relation and the distinctness condition (any ``m``)."""
    sg = _phase(pattern)
    n = np.asarray(n, dtype=np.int64)
    B = [_block_points(d, N) for N in (N1, N2, N3)]
    k = sg.index(-1)
    free = [i for i in range(3) if i != k]
    lo, hi = block_range((N1, N2, N3)[k])
    count = 0
    for a in B[free[0]]:
        c = a[None, :] + B[free[1]] - n[None, :]
        sup = np.max(np.abs(c), axis=1)
        ok = (sup > lo) & (sup <= hi)
        ok &= np.any(c != a[None, :], axis=1) & np.any(c != B[free[1]], axis=1)
        count += int(np.sum(ok))
    return count


# ----------------------------------------------------------------------------
# analytic bounds


def indicator_fourier_coeff(a: float, b: float, k: int) -> complex:
    """``int_a^b e^{-ikt} dt``: ``(e^{-ika} - e^{-ikb}) / (ik)`` for ``k != 0``, ``b - a`` for ``k = 0``.

    Its modulus is at most ``2/|k|``.
    """
    if not 0 <= a <= b <= 2 * np.pi + 1e-15:
        raise ValueError("need 0 <= a <= b <= 2 pi")
    k = int(k)
    if k == 0:
        return complex(b - a)
    return complex((np.exp(-1j * k * a) - np.exp(-1j * k * b)) / (1j * k))


def matrix_aat_bound(A, tol: float = 1e-12, max_steps: int = 100_000):
    """``(bound, exact)`` for ``||A A^*||``.

    ``bound = max_j sum_k |A_jk|^2 + (sum_{i != j} |sum_k A_ik conj(A_jk)|^2)^{1/2}``, the
    sum running over ordered pairs; ``exact`` is the top eigenvalue of ``A A^*`` by
    power iteration.
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    H = A @ A.conj().T
    diag = np.real(np.diag(H))
    off = H - np.diag(np.diag(H))
    bound = float(np.max(diag) + np.sqrt(np.sum(np.abs(off) ** 2)))
    return bound, _top_eigenvalue(H, tol, max_steps)


def _top_eigenvalue(H: np.ndarray, tol: float, max_steps: int) -> float:
    n = H.shape[0]
    if not np.any(H):
        return 0.0
    x = np.exp(1j * np.arange(n)) / math.sqrt(n) + 1.0 / n  # deterministic, generic start
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_steps):
        y = H @ x
        ny = np.linalg.norm(y)
        if ny == 0:
            # start vector in the kernel; restart from a basis vector
            x = np.zeros(n, dtype=complex)
            x[int(np.argmax(np.real(np.diag(H))))] = 1
            continue
        new = float(np.real(np.vdot(x, y)))
        x = y / ny
        if abs(new - lam) <= tol * abs(new) and abs(ny - new) <= 1e-10 * ny:
            return float(ny)
        lam = new
    raise ConvergenceFailure(f"power iteration did not converge in {max_steps} steps")


# ----------------------------------------------------------------------------
# query objects and fits


@dataclass(frozen=True)
class CountQuery:
    kind: str
    d: int = 3
    A: int | None = None
    R: float | None = None
    r: float | None = None
    normal: tuple | None = None
    offset: float = 0
    n2: tuple | None = None
    mu: int | None = None
    N1: int | None = None
    N2: int | None = None
    N3: int | None = None
    n: tuple | None = None
    m: int | None = None
    pattern: str = "conj1"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown count kind {self.kind!r}; expected one of {KINDS}")
        missing = [k for k in _NEEDS[self.kind] if getattr(self, k) is None]
        if missing:
            raise ValueError(f"{self.kind} query is missing {', '.join(missing)}")

    def to_dict(self) -> dict:
        """``kind``, ``d`` and the fields the kind uses."""
        data = asdict(self)
        return {k: data[k] for k in ("kind", "d") + _USES[self.kind]}


_NEEDS = {"sum_of_squares": ("A",), "sphere": ("R",), "ball_plane": ("r", "normal"),
          "bilinear_level_set": ("n2", "mu", "N1", "N3"), "resonance": ("n", "m", "N1", "N2", "N3")}
_USES = {**_NEEDS, "ball_plane": ("r", "normal", "offset"), "resonance": ("n", "m", "N1", "N2", "N3", "pattern")}


@dataclass
class CountResult:
    query: CountQuery
    cardinality: int
    bound_value: float = float("nan")
    ratio: float = float("nan")
    triples: list = field(default_factory=list)


def run_query(q: CountQuery, budget=DEFAULT_BUDGET, strategy: str | None = None) -> CountResult:
    """Exact count for a query, with the growth bound shape (constant 1) and their ratio."""
    if q.kind == "sum_of_squares":
        c = count_sum_of_squares(q.d, q.A, budget)
        bnd = sphere_bound(q.d, math.sqrt(q.A)) if q.A > 0 else 1.0
    elif q.kind == "sphere":
        c = count_sphere(q.d, q.R, budget)
        bnd = sphere_bound(q.d, q.R) if q.R > 0 else 1.0
    elif q.kind == "ball_plane":
        c = count_ball_plane(q.d, q.r, q.normal, q.offset, strategy or "filter", budget)
        bnd = float(q.r) ** (q.d - 1)
    elif q.kind == "bilinear_level_set":
        c = count_bilinear_level_set(q.d, q.n2, q.mu, q.N1, q.N3, strategy or "vectorized", budget)
        bnd = bilinear_bound(q.d, q.N1, q.N3)
    else:
        trip = resonance_set(q.d, q.n, q.m, q.N1, q.N2, q.N3, q.pattern, strategy or "direct", budget)
        return CountResult(q, len(trip), float("nan"), float("nan"), trip)
    ratio = c / bnd if bnd > 0 else float("nan")
    return CountResult(q, int(c), float(bnd), float(ratio))


def sphere_bound(d: int, R: float, eps: float = EPSILON) -> float:
    return float(R ** (d - 2 + eps))


def sum_of_squares_exponent(d: int) -> float:
    """Exponent ``a`` in ``r_d(A) <~ A^{a + eps}`` (``a = (d-2)/2`` for ``d > 4`` without ``eps``)."""
    return {2: 0.0, 3: 0.5, 4: 1.0}.get(d, (d - 2) / 2)


def window_maxima(table: np.ndarray, A_min: int = 4):
    """Max of ``table`` over dyadic windows ``[2^k, 2^{k+1})``; returns ``(upper ends, maxima)``."""
    ends, maxima = [], []
    k = int(math.log2(A_min))
    while 2 ** (k + 1) <= table.size:
        lo, hi = 2 ** k, 2 ** (k + 1)
        ends.append(hi - 1)
        maxima.append(int(np.max(table[lo:hi])))
        k += 1
    return np.array(ends), np.array(maxima)


def loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope and intercept of ``log y`` against ``log x``."""
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def corpus_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "params", "cardinality", "bound_value", "ratio"])
    for r in results:
        params = ";".join(f"{k}={v}" for k, v in r.query.to_dict().items() if k != "kind")
        w.writerow([r.query.kind, params, r.cardinality, "%.17g" % r.bound_value, "%.17g" % r.ratio])
    return buf.getvalue()


# ----------------------------------------------------------------------------
# golden corpus

GOLDEN_QUERIES = (
    [CountQuery("sum_of_squares", d=3, A=A) for A in (0, 1, 2, 3, 7, 25, 29, 50, 125, 1000, 1998)]
    + [CountQuery("sum_of_squares", d=4, A=A) for A in (1, 4, 12, 100)]
    + [CountQuery("sphere", d=d, R=R) for d, R in ((3, 1.0), (3, 3.0), (3, 5.0), (2, 5.0), (4, 2.0), (3, 2.5))]
    + [CountQuery("ball_plane", d=3, r=r, normal=nv, offset=o)
       for r, nv, o in ((1, (0, 0, 1), 0), (3, (1, 1, 0), 1), (4, (1, 2, 3), 2), (5, (2, -1, 1), Fraction(1, 2)))]
    + [CountQuery("bilinear_level_set", d=d, n2=n2, mu=mu, N1=N1, N3=N3)
       for d, n2, mu, N1, N3 in ((2, (0, 0), 0, 4, 2), (3, (1, 0, 0), 2, 4, 4), (3, (0, 0, 0), 5, 8, 4),
                                 (3, (2, 1, 0), -3, 4, 2))]
    + [CountQuery("resonance", d=3, n=n, m=m, N1=a, N2=b, N3=c, pattern=pat)
       for n, m, a, b, c, pat in (((1, 0, 0), -3, 4, 2, 2, "conj1"), ((1, 0, 0), 5, 4, 2, 2, "conj2"),
                                  ((1, 1, 0), 2, 2, 4, 2, "conj1"), ((1, 1, 0), 12, 2, 4, 2, "conj2"),
                                  ((2, 1, 0), 1, 4, 4, 2, "conj1"), ((1, 0, 0), 1, 4, 2, 2, "conj2"))]
)

_ALT = {"ball_plane": ("filter", "solve"), "bilinear_level_set": ("vectorized", "loop"),
        "resonance": ("direct", "hash")}


def golden_corpus(queries=GOLDEN_QUERIES, budget=DEFAULT_BUDGET):
    """Run each query with two independent strategies; returns ``(results, mismatches)``."""
    results, mismatches = [], []
    theta = {}
    for q in queries:
        if q.kind in _ALT:
            a, b = (run_query(q, budget, s) for s in _ALT[q.kind])
            same = a.cardinality == b.cardinality and a.triples == b.triples
        else:
            a = run_query(q, budget)
            A = q.A if q.kind == "sum_of_squares" else _radius_sq(q.R)
            if A is None:
                same = a.cardinality == 0
            else:
                key = (q.d, max(A, 64))
                if key not in theta:
                    theta[key] = sum_of_squares_table(q.d, key[1], "theta", budget)
                same = a.cardinality == int(theta[key][A])
        results.append(a)
        if not same:
            mismatches.append(q)
    return results, mismatches
