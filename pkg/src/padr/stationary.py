"""Banded stationary states of ``A u + lam f(u) = 0`` by damped fixed-point iteration.

Starting from ``u_plus`` on the pattern and ``u_minus`` elsewhere, the map
``T u = u - h (A u + lam f(u))`` is a sup-norm contraction on the set of states
that sit in ``[alpha_plus, 1]`` on the pattern and in ``[-1, alpha_minus]`` off
it, provided the reaction constants are admissible and ``0 < h < h_max``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridIndex, GridParams
from .operator import _check_state, matvec_fast


class StationaryError(RuntimeError):
    pass


class BandEscapeError(StationaryError):
    pass


@dataclass(frozen=True)
class PatternSet:
    """A union of cells of the grid, given by ordinals."""

    params: GridParams
    members: frozenset

    def __post_init__(self):
        m = frozenset(int(k) for k in self.members)
        bad = [k for k in m if not 0 <= k < self.params.M]
        if bad:
            raise ValueError(f"pattern ordinals out of range: {sorted(bad)[:5]}")
        object.__setattr__(self, "members", m)

    @classmethod
    def from_indices(cls, params, indices):
        return cls(params, frozenset(i.ordinal if isinstance(i, GridIndex) else int(i) for i in indices))

    @classmethod
    def full(cls, params):
        return cls(params, frozenset(range(params.M)))

    @classmethod
    def empty(cls, params):
        return cls(params, frozenset())

    def mask(self):
        m = np.zeros(self.params.M, dtype=bool)
        m[list(self.members)] = True
        return m


@dataclass
class StationaryResult:
    u_tilde: np.ndarray
    iterations: int
    residual: float
    contraction_rate: float
    max_rate: float  # largest successive-gap ratio seen


def residual(u, op, rx):
    """``max |A u + lam f(u)|``."""
    u = _check_state(op, u)
    return float(np.abs(matvec_fast(op, u) + rx.lam * rx.eval_f(u)).max())


@dataclass
class BandReport:
    ok: bool
    margin_inside: float  # min over the pattern of u - alpha_plus
    margin_outside: float  # min off the pattern of alpha_minus - u
    violations: list  # ordinals

    def __bool__(self):
        return self.ok


def verify_bands(u, pattern, rx, tol=1e-12):
    u = np.asarray(u, dtype=np.float64)
    mask = pattern.mask()
    inside = u - rx.alpha_plus
    outside = rx.alpha_minus - u
    # the outer walls at +-1 count as violations but not toward the margins
    margin = np.where(mask, np.minimum(inside, 1.0 - u), np.minimum(outside, u + 1.0))
    bad = [int(k) for k in np.flatnonzero(margin < -tol)]
    mi = float(inside[mask].min()) if mask.any() else float("inf")
    mo = float(outside[~mask].min()) if (~mask).any() else float("inf")
    return BandReport(not bad, mi, mo, bad)


def initial_iterate(pattern, rx):
    return np.where(pattern.mask(), rx.u_plus, rx.u_minus)


def solve(pattern, op, rx, h=0.0625, tol=1e-12, max_iter=1_000_000, check_conditions=True):
    """Iterate ``T`` from the two-level profile until the step or the residual is below ``tol``."""
    if pattern.params != op.params:
        raise ValueError("pattern and operator live on different grids")
    if check_conditions:
        rx.conditions(h).raise_if_failed()
    u = initial_iterate(pattern, rx)
    mask = pattern.mask()
    lo = np.where(mask, rx.alpha_plus, -1.0)
    hi = np.where(mask, 1.0, rx.alpha_minus)
    slack = 1e-12
    prev_step = None
    rate = 0.0
    max_rate = 0.0
    for it in range(1, max_iter + 1):
        F = matvec_fast(op, u) + rx.lam * rx.eval_f(u)
        res = float(np.abs(F).max())
        if res <= tol:
            return StationaryResult(u, it - 1, res, rate, max_rate)
        new = u - h * F
        if np.any(new < lo - slack) or np.any(new > hi + slack):
            k = int(np.flatnonzero((new < lo - slack) | (new > hi + slack))[0])
            raise BandEscapeError(
                f"iterate {it} left the band at ordinal {k} (value {new[k]:.6g}); "
                "reaction constants or step size are not admissible"
            )
        step = float(np.abs(new - u).max())
        u = new
        if prev_step:
            rate = step / prev_step
            max_rate = max(max_rate, rate)
        prev_step = step
        if step == 0.0 or (0 < rate < 1 and step <= tol * (1.0 - rate)):
            res = residual(u, op, rx)
            return StationaryResult(u, it, res, rate, max_rate)
    raise StationaryError(f"no convergence in {max_iter} iterations (observed rate {rate:.6g})")
