"""Moving between resolutions: sampling, embedding and successive-N studies.

A profile is a finitely described function on Q_p^n that can be sampled at
the representatives of any grid.  ``embed`` maps a state at resolution ``N``
to resolution ``N' > N``: inside ``B_N`` each fine point copies the value of
its coarse cell, outside ``B_N`` it is zero.

Comparisons between resolutions are reported in two parts: the gap on the
coarse support ``B_N`` (``interior``) and the size of the fine solution on
``B_N' \\ B_N`` (``tail``).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType

import numpy as np
import scipy.sparse.linalg as spla

from .dynamics import integrate
from .grid import ORD_INF, GridParams, ord_of_coords
from .kernel import truncate
from .operator import build, matvec_fast, semigroup_apply
from .reaction import Reaction


@dataclass(frozen=True)
class Constant:
    value: float

    def sample(self, params):
        return np.full(params.M, float(self.value))

    @property
    def sup(self):
        return abs(float(self.value))


@dataclass(frozen=True)
class NormRule:
    """Value as a function of ``||x - center||_p = p**r``.

    ``levels[r]`` gives the value on the sphere of radius ``p**r``; radii below
    the smallest key (and ``x = center``) take ``below``, radii above the
    largest key take ``above``.
    """

    levels: dict
    below: float = 0.0
    above: float = 0.0
    center: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "levels", MappingProxyType({int(k): float(v) for k, v in dict(self.levels).items()}))
        object.__setattr__(self, "center", tuple(Fraction(c) for c in self.center))

    def value_at_exponent(self, r):
        if r in self.levels:
            return self.levels[r]
        if not self.levels or r < min(self.levels):
            return self.below
        if r > max(self.levels):
            return self.above
        raise ValueError(f"radius exponent {r} falls in a gap of the level table")

    def sample(self, params):
        c = params.coords
        if self.center:
            if len(self.center) != params.n:
                raise ValueError("center has the wrong dimension")
            scale = params.p**params.N
            shift = []
            for v in self.center:
                q = v * scale
                if q.denominator != 1:
                    raise ValueError(f"center coordinate {v} is finer than the grid resolution")
                shift.append(int(q.numerator) % params.P)
            c = (c - np.asarray(shift, dtype=np.int64)) % params.P
        ords = ord_of_coords(params, c)
        out = np.empty(params.M)
        for v in np.unique(ords):
            # the center's own cell is sampled at the center itself
            out[ords == v] = self.below if v == ORD_INF else self.value_at_exponent(-int(v))
        return out

    @property
    def sup(self):
        return max([abs(self.below), abs(self.above)] + [abs(v) for v in self.levels.values()])


@dataclass(frozen=True)
class DigitRule:
    """Function supported in ``B_L`` and constant on the balls of radius ``p**-L``.

    ``table`` is indexed by the ordinal of the point on the resolution-``L``
    grid; points outside ``B_L`` take ``outside``.
    """

    L: int
    table: tuple
    outside: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "table", tuple(float(v) for v in np.asarray(self.table).ravel()))

    def level_params(self, params):
        return GridParams(params.p, params.n, self.L)

    def sample(self, params):
        p, N, L = params.p, params.N, self.L
        coarse = self.level_params(params)
        if len(self.table) != coarse.M:
            raise ValueError(f"table has {len(self.table)} entries, level-{L} grid has {coarse.M}")
        c = params.coords
        if N >= L:
            step = p ** (N - L)
            inside = np.all(c % step == 0, axis=1)
            cc = (c // step) % coarse.P
        else:
            inside = np.ones(params.M, dtype=bool)
            cc = c * p ** (L - N)
        ords = np.ravel_multi_index(tuple(cc.T), coarse.shape)
        return np.where(inside, np.asarray(self.table)[ords], self.outside)

    @property
    def sup(self):
        return max([abs(self.outside)] + [abs(v) for v in self.table])


def project(profile, params):
    """Samples of ``profile`` at the grid representatives, in ordinal order."""
    return profile.sample(params)


def _fine_map(coarse, fine):
    """For each fine ordinal: its coarse ordinal, or -1 outside ``B_N``."""
    if fine.p != coarse.p or fine.n != coarse.n:
        raise ValueError("grids differ in p or n")
    if fine.N <= coarse.N:
        raise ValueError(f"embedding needs N' > N, got N'={fine.N}, N={coarse.N}")
    step = fine.p ** (fine.N - coarse.N)
    c = fine.coords
    inside = np.all(c % step == 0, axis=1)
    cc = (c // step) % coarse.P
    ords = np.ravel_multi_index(tuple(cc.T), coarse.shape)
    return np.where(inside, ords, -1)


def embed(u, coarse, N_fine):
    """State at resolution ``coarse.N`` as a state at ``N_fine`` (zero outside ``B_N``)."""
    fine = coarse.with_N(N_fine)
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (coarse.M,):
        raise ValueError("state does not match the coarse grid")
    idx = _fine_map(coarse, fine)
    return np.where(idx >= 0, u[np.maximum(idx, 0)], 0.0)


def restrict(u_fine, fine, N_coarse):
    """Values of a fine state at the coarse representatives."""
    coarse = fine.with_N(N_coarse)
    idx = _fine_map(coarse, fine)
    out = np.empty(coarse.M)
    sel = idx >= 0
    step = fine.p ** (fine.N - N_coarse)
    # the representative of each coarse cell is the fine point with zero fine digits
    rep = np.all(fine.coords % step == 0, axis=1) & np.all(fine.coords < step * coarse.P, axis=1)
    out[idx[sel & rep]] = np.asarray(u_fine)[sel & rep]
    return out


@dataclass(frozen=True)
class Gap:
    interior: float  # sup over B_N of |E u_N - u_N'|
    tail: float  # sup over B_N' \ B_N of |u_N'|


def compare(u_coarse, coarse, u_fine, N_fine):
    fine = coarse.with_N(N_fine)
    idx = _fine_map(coarse, fine)
    inside = idx >= 0
    e = embed(u_coarse, coarse, N_fine)
    d = np.abs(e - np.asarray(u_fine))
    interior = float(d[inside].max()) if inside.any() else 0.0
    tail = float(d[~inside].max()) if (~inside).any() else 0.0
    return Gap(interior, tail)


def projection_error(profile, params_or_pn, N_list, oversample=2, include_tail=False):
    """``sup |phi - E P_N phi|`` sampled on the grid at ``max(N_list) + oversample``.

    The sup runs over ``B_N`` unless ``include_tail`` is set, in which case the
    part of the sampling grid outside ``B_N`` (where ``E P_N phi = 0``) counts too.
    """
    p, n = params_or_pn if isinstance(params_or_pn, tuple) else (params_or_pn.p, params_or_pn.n)
    fine = GridParams(p, n, max(N_list) + oversample)
    ref = project(profile, fine)
    out = []
    for N in N_list:
        coarse = fine.with_N(N)
        g = compare(project(profile, coarse), coarse, ref, fine.N)
        out.append(max(g.interior, g.tail) if include_tail else g.interior)
    return out


@dataclass
class ResolventResult:
    N_list: tuple
    gaps: list  # interior gaps between successive N
    tails: list
    iterations: list
    solutions: list = field(repr=False, default_factory=list)


def resolvent_apply(op, rhs, lambda0, rtol=1e-13):
    if not lambda0 < 0:
        raise ValueError("lambda0 must be negative")
    lin = spla.LinearOperator((op.M, op.M), matvec=lambda v: matvec_fast(op, v) - lambda0 * v, dtype=np.float64)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.cg(lin, rhs, rtol=rtol, atol=0.0, maxiter=10 * op.M + 100, callback=cb)
    if info != 0:
        raise RuntimeError(f"conjugate gradient did not converge (info={info})")
    return x, count[0]


def resolvent_check(kernel, lambda0, profile, p, n, N_list, rtol=1e-13):
    """``(A_N - lambda0)^{-1} P_N phi`` for each ``N`` and the gaps between successive ones."""
    N_list = tuple(sorted(N_list))
    sols, its = [], []
    for N in N_list:
        params = GridParams(p, n, N)
        op = build(params, truncate(kernel, params))
        x, k = resolvent_apply(op, project(profile, params), lambda0, rtol)
        sols.append((params, x))
        its.append(k)
    gaps, tails = [], []
    for (pc, xc), (pf, xf) in zip(sols[:-1], sols[1:]):
        g = compare(xc, pc, xf, pf.N)
        gaps.append(g.interior)
        tails.append(g.tail)
    return ResolventResult(N_list, gaps, tails, its, [x for _, x in sols])


@dataclass
class ConvergenceRow:
    N_coarse: int
    N_fine: int
    sup_gap: float
    semigroup_gap: float
    runtime_ms: float
    tail_gap: float
    semigroup_tail_gap: float


def convergence_study(profile, kernel, rx, cfg, p, n, N_list):
    """Successive-resolution gaps of the full dynamics and of the linear semigroup.

    Each resolution integrates the projected profile with the same kernel
    truncated at that resolution; gaps are sup-norms over the recorded times.
    """
    N_list = tuple(sorted(N_list))
    runs = []
    for N in N_list:
        t0 = time.perf_counter()
        params = GridParams(p, n, N)
        op = build(params, truncate(kernel, params))
        u0 = project(profile, params)
        traj = integrate(u0, op, rx, cfg)
        lin = [semigroup_apply(op, u0, t) for t in traj.times]
        runs.append((params, traj, lin, (time.perf_counter() - t0) * 1e3))
    rows = []
    for (pc, tc, lc, ms_c), (pf, tf, lf, ms_f) in zip(runs[:-1], runs[1:]):
        if len(tc.times) != len(tf.times) or not np.allclose(tc.times, tf.times, rtol=0, atol=1e-12):
            raise RuntimeError("recorded times differ between resolutions")
        g = [compare(a, pc, b, pf.N) for a, b in zip(tc.snapshots, tf.snapshots)]
        s = [compare(a, pc, b, pf.N) for a, b in zip(lc, lf)]
        rows.append(
            ConvergenceRow(
                pc.N,
                pf.N,
                max(x.interior for x in g),
                max(x.interior for x in s),
                ms_c + ms_f,
                max(x.tail for x in g),
                max(x.tail for x in s),
            )
        )
    return rows


def linear_reaction():
    """Reaction with ``lam = 0`` (pure ultradiffusion)."""
    return Reaction(lam=0.0)


__all__ = [
    "Constant",
    "NormRule",
    "DigitRule",
    "project",
    "embed",
    "restrict",
    "compare",
    "Gap",
    "projection_error",
    "resolvent_apply",
    "resolvent_check",
    "convergence_study",
    "ConvergenceRow",
]
