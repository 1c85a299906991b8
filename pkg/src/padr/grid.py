"""The finite ultrametric group G_N^n = B_N^n / B_{-N}^n.

An element is stored as ``n`` coordinates of ``2N`` base-``p`` digits
``a_{-N}, ..., a_{N-1}``; digit ``a_k`` sits at slot ``k + N`` with weight
``p**(k + N)``.  Per coordinate the digits pack into an integer
``m in [0, p**(2N))`` and the representative in Q_p is ``m / p**N``.  The
canonical ordinal is the coordinate-lexicographic composite of
``(m_1, ..., m_n)`` with ``m_1`` most significant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

MAX_GRID_SIZE = 2**31

#: Sentinel used in integer valuation arrays for ord = +infinity.
ORD_INF = np.iinfo(np.int32).max


def is_prime(k):
    if k < 2:
        return False
    if k < 4:
        return True
    if k % 2 == 0:
        return False
    return all(k % d for d in range(3, math.isqrt(k) + 1, 2))


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridParams:
    p: int
    n: int
    N: int

    def __post_init__(self):
        for name in ("p", "n", "N"):
            if not isinstance(getattr(self, name), (int, np.integer)):
                raise GridError(f"{name} must be an integer")
        if not is_prime(int(self.p)):
            raise GridError(f"p={self.p} is not prime")
        if self.n < 1 or self.N < 1:
            raise GridError("need n >= 1 and N >= 1")
        if self.p ** (2 * self.N * self.n) > MAX_GRID_SIZE:
            raise GridError(
                f"grid size p^(2Nn) = {self.p}^{2 * self.N * self.n} exceeds {MAX_GRID_SIZE}"
            )

    @property
    def M(self):
        """Number of grid points ``p**(2Nn)``."""
        return self.p ** (2 * self.N * self.n)

    @property
    def P(self):
        """Per-coordinate modulus ``p**(2N)``."""
        return self.p ** (2 * self.N)

    @property
    def cell_volume(self):
        """Haar volume ``p**(-Nn)`` of one cell ``i + B_{-N}^n``."""
        return float(self.p) ** (-self.N * self.n)

    @property
    def shape(self):
        return (self.P,) * self.n

    @cached_property
    def coords(self):
        """``(M, n)`` int64 array of packed coordinates for every ordinal."""
        idx = np.arange(self.M, dtype=np.int64)
        return np.stack(np.unravel_index(idx, self.shape), axis=1).astype(np.int64)

    def ordinal_of(self, coords):
        return int(np.ravel_multi_index(tuple(int(c) for c in coords), self.shape))

    def with_N(self, N):
        return GridParams(self.p, self.n, N)


@dataclass(frozen=True)
class GridIndex:
    params: GridParams
    ordinal: int

    def __post_init__(self):
        if not 0 <= self.ordinal < self.params.M:
            raise GridError(f"ordinal {self.ordinal} out of range [0, {self.params.M})")

    @classmethod
    def from_coords(cls, params, coords):
        return cls(params, params.ordinal_of(coords))

    @classmethod
    def from_digits(cls, params, digits):
        """``digits[j][s]`` is the digit at slot ``s`` of coordinate ``j``."""
        digits = np.asarray(digits, dtype=np.int64).reshape(params.n, 2 * params.N)
        if digits.min() < 0 or digits.max() >= params.p:
            raise GridError("digit outside [0, p-1]")
        weights = params.p ** np.arange(2 * params.N, dtype=np.int64)
        return cls.from_coords(params, digits @ weights)

    @classmethod
    def from_rationals(cls, params, values):
        """Build from representatives given as rationals (one per coordinate).

        Each value is reduced modulo ``p**N`` so any rational whose denominator
        is a power of ``p`` not exceeding ``p**N`` is accepted.
        """
        if not isinstance(values, (list, tuple)):
            values = [values]
        if len(values) != params.n:
            raise GridError(f"expected {params.n} coordinates, got {len(values)}")
        coords = []
        scale = params.p**params.N
        for v in values:
            q = Fraction(v) * scale
            if q.denominator != 1:
                raise GridError(f"{v} is not representable at resolution N={params.N}")
            coords.append(int(q.numerator) % params.P)
        return cls.from_coords(params, coords)

    @property
    def coords(self):
        return tuple(int(c) for c in np.unravel_index(self.ordinal, self.params.shape))

    @property
    def digits(self):
        """``(n, 2N)`` array; column ``s`` holds digit ``a_{s-N}``."""
        p, N = self.params.p, self.params.N
        out = np.empty((self.params.n, 2 * N), dtype=np.int64)
        for j, m in enumerate(self.coords):
            for s in range(2 * N):
                m, out[j, s] = divmod(m, p)
        return out

    def rationals(self):
        scale = self.params.p**self.params.N
        return tuple(Fraction(m, scale) for m in self.coords)

    def __str__(self):
        parts = ",".join(str(r) for r in self.rationals())
        return f"({parts})" if self.params.n > 1 else parts


def enumerate_grid(params):
    """All ``p**(2Nn)`` indices in canonical ordinal order."""
    return [GridIndex(params, k) for k in range(params.M)]


def _check_same(i, j):
    if i.params != j.params:
        raise GridError("indices belong to different grids")


def add(i, j):
    _check_same(i, j)
    P = i.params.P
    return GridIndex.from_coords(i.params, [(a + b) % P for a, b in zip(i.coords, j.coords)])


def sub(i, j):
    """Group difference, i.e. per-coordinate digit subtraction with borrow mod ``p**(2N)``."""
    _check_same(i, j)
    P = i.params.P
    return GridIndex.from_coords(i.params, [(a - b) % P for a, b in zip(i.coords, j.coords)])


def _vp(m, p, limit):
    """p-adic valuation of a nonnegative integer, capped at ``limit`` for zero."""
    if m == 0:
        return limit
    v = 0
    while m % p == 0:
        m //= p
        v += 1
    return v


def valuation(i, j):
    """``ord(i - j)`` in ``[-N, N-1]``, or ``math.inf`` when ``i == j``."""
    d = sub(i, j)
    N = i.params.N
    slot = min(_vp(m, i.params.p, 2 * N) for m in d.coords)
    return math.inf if slot == 2 * N else slot - N


def norm(i, j):
    """``||i - j||_p`` as a float (``0.0`` for equal indices)."""
    v = valuation(i, j)
    return 0.0 if v == math.inf else float(i.params.p) ** (-v)


def ord_of_coords(params, coords):
    """Vectorized ``ord`` of packed coordinates ``(..., n)``; ``ORD_INF`` for zero."""
    coords = np.asarray(coords, dtype=np.int64)
    p, N = params.p, params.N
    slot = np.full(coords.shape[:-1], 2 * N, dtype=np.int64)
    for j in range(params.n):
        m = coords[..., j]
        s = np.full(m.shape, 2 * N, dtype=np.int64)
        for k in range(2 * N - 1, -1, -1):
            s = np.where(m % p ** (k + 1) != 0, k, s)
        slot = np.minimum(slot, s)
    out = slot - N
    return np.where(slot == 2 * N, ORD_INF, out).astype(np.int64)


def ord_from_origin(params):
    """``ord(i)`` for every ordinal ``i`` (``ORD_INF`` at the origin)."""
    return ord_of_coords(params, params.coords)


def pairwise_ord(params):
    """Dense ``(M, M)`` table of ``ord(k - i)``.  Test-oracle sized grids only."""
    table = ord_from_origin(params)
    c = params.coords
    flat = np.zeros((params.M, params.M), dtype=np.int64)
    for j in range(params.n):
        flat = flat * params.P + (c[:, None, j] - c[None, :, j]) % params.P
    return table[flat]


def ball_volume(p, n, r):
    """Haar volume ``p**(r n)`` of a ball of radius ``p**r`` in Q_p^n."""
    return float(p) ** (r * n)


def sphere_volume(p, n, r):
    return ball_volume(p, n, r) * (1.0 - float(p) ** (-n))


def sphere_count(params, r):
    """Number of grid points at distance exactly ``p**r`` from a fixed point."""
    p, n, N = params.p, params.n, params.N
    if r == -N:
        return 1
    if not -N < r <= N:
        return 0
    return p ** ((N + r) * n) - p ** ((N + r - 1) * n)


class LevelTree:
    """The ball filtration ``B_{-N} subset ... subset B_N`` as a ``p**n``-ary tree.

    Nodes at radius ``p**r`` are the balls of that radius; two indices share
    such a ball iff their digits agree at every slot below ``N - r``.  A node is
    numbered by the composite of the per-coordinate residues
    ``m_j mod p**(N - r)``, so radius ``-N`` nodes are the leaves in ordinal
    order and radius ``N`` is the root.
    """

    def __init__(self, params):
        self.params = params

    @property
    def depth(self):
        return 2 * self.params.N

    def radii(self):
        return range(-self.params.N, self.params.N + 1)

    def node_count(self, r):
        return self.params.p ** ((self.params.N - r) * self.params.n)

    def children_count(self):
        return self.params.p**self.params.n

    def ancestors(self, r):
        """Node id at radius ``p**r`` for every ordinal."""
        params = self.params
        side = params.p ** (params.N - r)
        low = params.coords % side
        return np.ravel_multi_index(tuple(low.T), (side,) * params.n) if params.n > 1 else low[:, 0]

    def members(self, r, node):
        return np.flatnonzero(self.ancestors(r) == node)

    def parent(self, r, node):
        """Id of the radius ``p**(r+1)`` ball containing node ``node`` of radius ``p**r``."""
        params = self.params
        side = params.p ** (params.N - r)
        c = np.unravel_index(node, (side,) * params.n)
        return int(np.ravel_multi_index(tuple(x % (side // params.p) for x in c), (side // params.p,) * params.n))
