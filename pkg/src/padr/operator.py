"""The ultradiffusion generator ``A = j_N I - a`` on G_N^n.

``a`` is a Parisi-type matrix: the entry for a pair of grid points depends only
on their p-adic distance.  The operator stores one coefficient per distance
class and applies itself through ball sums, never forming the matrix except on
request for small grids.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _fast
from .grid import ORD_INF, GridParams, pairwise_ord
from .kernel import TruncatedKernel, truncate

DENSE_LIMIT = 4096
_SUBSTEP_RATE = 8.0  # uniformization substep: tau * j_N <= this


class OperatorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class UltradiffOperator:
    """``level_coeffs[k]`` is the matrix entry at distance ``p**r``, ``r = -N + 1 + k``."""

    params: GridParams
    level_coeffs: np.ndarray
    diag_coeff: float
    j_N: float
    kernel: TruncatedKernel | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def M(self):
        return self.params.M

    def coeff_at(self, r):
        """Matrix entry of ``a`` for two points at distance ``p**r``."""
        N = self.params.N
        if not -N < r <= N:
            raise OperatorError(f"distance exponent {r} outside (-{N}, {N}]")
        return float(self.level_coeffs[r + N - 1])

    @property
    def jump_coeffs(self):
        """Pyramid weights: entry jump across each ball level, root first."""
        if "jumps" not in self._cache:
            a = self.level_coeffs
            N = self.params.N
            c = np.empty(2 * N + 1)
            c[0] = a[-1]
            for q in range(1, 2 * N):
                c[q] = a[2 * N - 1 - q] - a[2 * N - q]
            c[2 * N] = self.diag_coeff - a[0]
            self._cache["jumps"] = c
        return self._cache["jumps"]

    def row_sum_residual(self):
        """``|j_N - (a_diag + sum_r a_r * #sphere_r)|``."""
        from .grid import sphere_count

        N = self.params.N
        terms = [self.diag_coeff] + [
            self.coeff_at(r) * sphere_count(self.params, r) for r in range(-N + 1, N + 1)
        ]
        return abs(self.j_N - math.fsum(terms))


def build(params, tk):
    """Operator for the truncated kernel ``tk`` on the grid ``params``."""
    if isinstance(tk, TruncatedKernel):
        if tk.params != params:
            raise OperatorError(f"kernel truncated at N={tk.N} but grid has N={params.N}")
    else:
        tk = truncate(tk, params)
    values = np.asarray(tk.level_values, dtype=np.float64)
    if (values < 0).any() or tk.diag_mass < 0:
        raise OperatorError("negative kernel values")
    coeffs = values * params.cell_volume
    return UltradiffOperator(params, coeffs, float(tk.diag_mass), float(tk.j_N), tk)


def _check_state(op, u):
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (op.M,):
        raise OperatorError(f"state has shape {u.shape}, expected ({op.M},)")
    return u


def adjacency_dense(op):
    """The matrix ``a`` as a dense ``(M, M)`` array (oracle use)."""
    if op.M > DENSE_LIMIT:
        raise OperatorError(f"M={op.M} exceeds the dense limit {DENSE_LIMIT}")
    if "adj" not in op._cache:
        ords = pairwise_ord(op.params)
        N = op.params.N
        table = np.concatenate([op.level_coeffs[::-1], [op.diag_coeff]])
        # ord v in [-N, N-1] -> distance exponent -v -> table slot v + N
        slot = np.where(ords == ORD_INF, 2 * N, ords + N)
        op._cache["adj"] = table[slot]
    return op._cache["adj"]


def dense_matrix(op):
    """``A = j_N I - a`` as a dense array."""
    if "dense" not in op._cache:
        op._cache["dense"] = op.j_N * np.eye(op.M) - adjacency_dense(op)
    return op._cache["dense"]


def matvec_dense(op, u):
    u = _check_state(op, u)
    return dense_matrix(op) @ u


def adjacency_apply(op, u, backend=None):
    u = _check_state(op, u)
    p, n = op.params.p, op.params.n
    return _fast.hierarchical_apply(u, op.jump_coeffs, p, n, 2 * op.params.N, backend)


def matvec_fast(op, u, backend=None):
    """``A u`` in ``O(M N)`` through ball sums."""
    u = _check_state(op, u)
    return op.j_N * u - adjacency_apply(op, u, backend)


@dataclass
class QMatrixReport:
    ok: bool
    min_offdiag: float  # of -A, must be >= 0
    max_row_residual: float
    negative_entries: list  # (row, col) pairs of -A below zero
    bad_rows: list

    def __bool__(self):
        return self.ok


def validate_qmatrix(op_or_matrix, rtol=1e-12):
    """Check that ``-A`` is a Q-matrix: nonnegative off-diagonals, zero row sums.

    Accepts an operator (checked through its dense form when small, else via
    its level coefficients) or an explicit square matrix.
    """
    if isinstance(op_or_matrix, UltradiffOperator):
        op = op_or_matrix
        scale = max(op.j_N, 1e-300)
        if op.M > DENSE_LIMIT:
            neg = [r for r in range(-op.params.N + 1, op.params.N + 1) if op.coeff_at(r) < 0]
            res = op.row_sum_residual()
            ok = not neg and res <= rtol * scale
            return QMatrixReport(ok, float(op.level_coeffs.min()), res, neg, [] if ok else [-1])
        A = dense_matrix(op)
    else:
        A = np.asarray(op_or_matrix, dtype=np.float64)
        scale = max(float(np.abs(np.diag(A)).max(initial=0.0)), 1e-300)
    Q = -A
    off = Q.copy()
    np.fill_diagonal(off, np.inf)
    neg = [tuple(int(x) for x in ij) for ij in np.argwhere(off < 0)]
    rows = np.abs(A.sum(axis=1))
    bad = [int(k) for k in np.flatnonzero(rows > rtol * scale)]
    min_off = float(off.min()) if A.shape[0] > 1 else 0.0
    return QMatrixReport(not neg and not bad, min_off, float(rows.max(initial=0.0)), neg, bad)


def _uniformized_step(op, u, tau, tol):
    """``exp(-tau A) u`` for ``tau j_N`` of order one."""
    rate = op.j_N * tau
    if not np.any(u):
        return np.zeros_like(u)
    damp = math.exp(-rate)
    term = u.copy()
    acc = u.copy()
    weight = 1.0  # rate**k / k! relative to the first term
    k = 0
    while True:
        k += 1
        term = adjacency_apply(op, term) * (tau / k)
        acc += term
        weight *= rate / k
        # ||a^k u|| <= j_N^k ||u||: the neglected terms form a Poisson tail
        ratio = rate / (k + 1)
        if k >= rate and damp * weight * ratio / (1.0 - ratio) <= tol:
            break
    return damp * acc


def semigroup_apply(op, u, t, tol=1e-14):
    """``exp(-t A) u`` by uniformization over short substeps.

    Every series term is a nonnegative combination of ``u``, so nonnegative
    states stay nonnegative and constants are reproduced up to round-off.
    """
    u = _check_state(op, u).copy()
    if t < 0:
        raise OperatorError("semigroup time must be >= 0")
    if t == 0 or op.j_N == 0.0:
        return u
    steps = max(1, math.ceil(op.j_N * t / _SUBSTEP_RATE))
    tau = t / steps
    for _ in range(steps):
        u = _uniformized_step(op, u, tau, tol)
    return u


def dense_expm(op, t):
    """Dense ``exp(-t A)`` via the symmetric eigendecomposition (oracle use)."""
    w, V = spectral_decomposition(op)
    return (V * np.exp(-t * w)) @ V.T


def spectral_decomposition(op):
    if "eigh" not in op._cache:
        # divide-and-conquer: several times faster than the default driver at M ~ 4096
        op._cache["eigh"] = scipy.linalg.eigh(dense_matrix(op), driver="evd")
    return op._cache["eigh"]


def spectrum(op):
    """Ascending eigenvalues of the symmetric matrix ``A``."""
    if op.M > DENSE_LIMIT:
        raise OperatorError(f"M={op.M} exceeds the dense limit {DENSE_LIMIT}")
    if "eigvals" not in op._cache:
        if "eigh" in op._cache:
            op._cache["eigvals"] = op._cache["eigh"][0]
        else:
            op._cache["eigvals"] = scipy.linalg.eigvalsh(dense_matrix(op), driver="evd")
    return op._cache["eigvals"]
