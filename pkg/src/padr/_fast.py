"""Hierarchical application of a distance-only matrix on G_N^n.

Level ``q`` of the pyramid holds the sums of ``u`` over the balls of radius
``p**(N - q)``; a ball is identified by the residues ``m_j mod p**q`` of its
members.  Level ``2N`` is ``u`` itself and level ``0`` is the total sum.  With
``coeffs[q]`` the jump of the matrix entry across the sphere boundary at that
level, ``(a u)(x) = sum_q coeffs[q] * S_q[ball of x at level q]``.

Both paths sum children in the same fixed order, so results do not depend on
the thread count.
"""
from __future__ import annotations

import numpy as np

from . import _accel


def _up_numpy(u, p, n, depth):
    levels = [None] * (depth + 1)
    s = u.reshape((p**depth,) * n)
    levels[depth] = s
    for q in range(depth - 1, -1, -1):
        side = p**q
        s = s.reshape(tuple(x for _ in range(n) for x in (p, side)))
        s = s.sum(axis=tuple(range(0, 2 * n, 2)))
        levels[q] = s
    return levels


def hierarchical_apply_numpy(u, coeffs, p, n, depth):
    levels = _up_numpy(np.ascontiguousarray(u, dtype=np.float64), p, n, depth)
    t = coeffs[0] * levels[0]
    for q in range(depth):
        side = p**q
        expand = t.reshape(tuple(x for _ in range(n) for x in (1, side)))
        expand = np.broadcast_to(expand, tuple(x for _ in range(n) for x in (p, side)))
        t = expand.reshape((side * p,) * n) + coeffs[q + 1] * levels[q + 1]
    return t.reshape(-1)


if _accel.HAVE_NUMBA:
    from numba import njit, prange

    _BLOCK = 512

    @njit(cache=True)
    def _spread(node, side, big, k):
        # k base-`side` digits of `node` re-packed in base `big`
        out = 0
        mult = 1
        rem = node
        for _ in range(k):
            out += (rem % side) * mult
            rem //= side
            mult *= big
        return out

    @njit(cache=True)
    def _shrink(node, side, big, k):
        # k base-`big` digits of `node` reduced mod `side`, packed in base `side`
        out = 0
        mult = 1
        rem = node
        for _ in range(k):
            out += ((rem % big) % side) * mult
            rem //= big
            mult *= side
        return out

    def _apply_impl(u, coeffs, p, n, depth, offsets, sides, pyr):
        # Flat level arrays are rows of the last coordinate; tasks are
        # (row, block of the last coordinate) so inner loops avoid division.
        # Integer powers come precomputed: int ** int types as float here.
        m = u.shape[0]
        base = offsets[depth]
        for k in prange(m):
            pyr[base + k] = u[k]
        for q in range(depth - 1, -1, -1):
            side = sides[q]
            big = sides[q + 1]
            lo = offsets[q]
            hi = offsets[q + 1]
            rows = (offsets[q + 1] - offsets[q]) // side
            outer = 1
            for _ in range(n - 1):
                outer *= p
            nblk = (side + _BLOCK - 1) // _BLOCK
            for task in prange(rows * nblk):
                row = task // nblk
                r0 = (task % nblk) * _BLOCK
                r1 = min(r0 + _BLOCK, side)
                first = _spread(row, side, big, n - 1)
                dst = lo + row * side
                for r in range(r0, r1):
                    pyr[dst + r] = 0.0
                # fixed (d, a) order per entry keeps the sum reproducible
                for d in range(outer):
                    src = hi + (first + _spread(d, p, big, n - 1) * side) * big
                    for a in range(p):
                        off = src + a * side
                        for r in range(r0, r1):
                            pyr[dst + r] += pyr[off + r]
        # top-down, overwriting the pyramid with partial sums T_q
        pyr[offsets[0]] = coeffs[0] * pyr[offsets[0]]
        for q in range(depth):
            side = sides[q]
            big = sides[q + 1]
            lo = offsets[q]
            hi = offsets[q + 1]
            cq = coeffs[q + 1]
            rows = (offsets[q + 2] - offsets[q + 1]) // big
            nblk = (side + _BLOCK - 1) // _BLOCK
            for task in prange(rows * p * nblk):
                row = task // (p * nblk)
                a = (task // nblk) % p
                r0 = (task % nblk) * _BLOCK
                r1 = min(r0 + _BLOCK, side)
                src = lo + _shrink(row, side, big, n - 1) * side
                dst = hi + row * big + a * side
                for r in range(r0, r1):
                    pyr[dst + r] = pyr[src + r] + cq * pyr[dst + r]
        out = np.empty(m)
        for k in prange(m):
            out[k] = pyr[base + k]
        return out

    # same body twice: thread start-up dominates below PARALLEL_MIN_SIZE
    _apply_parallel = njit(cache=True, parallel=True)(_apply_impl)
    _apply_serial = njit(cache=True)(_apply_impl)


PARALLEL_MIN_SIZE = 1 << 15


def _offsets(p, n, depth):
    sizes = [p ** (q * n) for q in range(depth + 1)]
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


def hierarchical_apply_numba(u, coeffs, p, n, depth):
    offs = _offsets(p, n, depth)
    pyr = np.empty(int(offs[-1]), dtype=np.float64)
    kernel = _apply_parallel if u.shape[0] >= PARALLEL_MIN_SIZE and _accel.thread_count() > 1 else _apply_serial
    return kernel(
        np.ascontiguousarray(u, dtype=np.float64),
        np.ascontiguousarray(coeffs, dtype=np.float64),
        p, n, depth, offs, np.array([p**q for q in range(depth + 1)], dtype=np.int64), pyr,
    )


def hierarchical_apply(u, coeffs, p, n, depth, backend=None):
    """``sum_q coeffs[q] * S_q`` evaluated at every grid point."""
    backend = backend or _accel.backend()
    if backend == "numba":
        return hierarchical_apply_numba(u, coeffs, p, n, depth)
    return hierarchical_apply_numpy(u, coeffs, p, n, depth)
