"""Radial transition kernels ``J(||x||_p)`` on Q_p^n.

A radial kernel is constant on every sphere ``S_r = {||x||_p = p**r}``, so any
integral over a ball is an exact level sum
``sum_r J(p**r) * p**(r n) * (1 - p**-n)``.  Only the values ``J(p**r)`` enter
the discrete operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

from .grid import GridParams

_MAX_TERMS = 200_000
_RATIO_WINDOW = 8


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class RadialKernel:
    """``family`` is ``"table"``, ``"uniform_ball"`` or ``"exp_landscape"``.

    * table: ``levels[r] = J(p**r)``, zero at radii not listed;
    * uniform_ball: ``J = 1`` on the ball of radius ``p**radius_exp``;
    * exp_landscape: ``J(x) = x**gamma * exp(-x)``.

    Every family is multiplied by ``scale``.
    """

    family: str
    levels: Mapping[int, float] = field(default_factory=dict)
    radius_exp: int = 0
    gamma: float = 0.0
    scale: float = 1.0
    tail_tol: float = 1e-14

    def __post_init__(self):
        if self.family not in ("table", "uniform_ball", "exp_landscape"):
            raise KernelError(f"unknown kernel family {self.family!r}")
        levels = {int(r): float(v) for r, v in dict(self.levels).items()}
        if any(v < 0 or not math.isfinite(v) for v in levels.values()):
            raise KernelError("kernel level values must be finite and >= 0")
        object.__setattr__(self, "levels", MappingProxyType(levels))
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise KernelError("scale must be positive")

    @classmethod
    def table(cls, levels, **kw):
        return cls("table", levels=levels, **kw)

    @classmethod
    def uniform_ball(cls, radius_exp, **kw):
        return cls("uniform_ball", radius_exp=int(radius_exp), **kw)

    @classmethod
    def exp_landscape(cls, gamma, **kw):
        return cls("exp_landscape", gamma=float(gamma), **kw)

    def value(self, r, p):
        """``J(p**r)``."""
        if self.family == "table":
            return self.scale * self.levels.get(int(r), 0.0)
        if self.family == "uniform_ball":
            return self.scale if r <= self.radius_exp else 0.0
        x = float(p) ** r
        # log-space keeps x**gamma finite for very negative r
        return self.scale * math.exp(self.gamma * r * math.log(p) - x)

    def to_dict(self):
        d = {"family": self.family, "scale": self.scale}
        if self.family == "table":
            d["levels"] = {str(r): v for r, v in sorted(self.levels.items())}
        elif self.family == "uniform_ball":
            d["radius_exp"] = self.radius_exp
        else:
            d["gamma"] = self.gamma
        return d


def sphere_integral(J, r, p, n):
    """``int_{S_r} J = J(p**r) p**(rn) (1 - p**-n)``."""
    v = J.value(r, p)
    if v == 0.0:
        return 0.0
    return v * float(p) ** (r * n) * (1.0 - float(p) ** (-n))


@dataclass(frozen=True)
class LevelSum:
    value: float
    remainder: float  # bound on the neglected tail
    last_level: int  # last radius exponent actually summed


def _tail_sum(J, p, n, start, step):
    """Sum ``sphere_integral(r)`` for ``r = start, start+step, ...`` to ``tail_tol``."""
    terms = []
    r = start
    for _ in range(_MAX_TERMS):
        t = sphere_integral(J, r, p, n)
        terms.append(t)
        if len(terms) > _RATIO_WINDOW:
            window = terms[-_RATIO_WINDOW - 1 :]
            ratios = [b / a for a, b in zip(window[:-1], window[1:]) if a > 0]
            acc = math.fsum(terms)
            if ratios and len(ratios) == _RATIO_WINDOW and min(ratios) >= 1.0:
                side = "lower (r -> -inf)" if step < 0 else "upper (r -> +inf)"
                raise KernelError(f"{side} tail of the level sum diverges")
            rho = max(ratios) if ratios else 0.0
            bound = t * rho / (1.0 - rho) if rho < 1.0 else math.inf
            if acc == 0.0 and t == 0.0 and all(w == 0.0 for w in window):
                return LevelSum(0.0, 0.0, r)
            if bound <= J.tail_tol * acc * 0.5:
                return LevelSum(acc, bound, r)
        r += step
    side = "lower (r -> -inf)" if step < 0 else "upper (r -> +inf)"
    raise KernelError(f"{side} tail did not converge within {_MAX_TERMS} levels")


def ball_integral(J, R, p, n):
    """``int_{B_R} J`` (ball of radius ``p**R``) as a :class:`LevelSum`."""
    if J.family == "table":
        return LevelSum(math.fsum(sphere_integral(J, r, p, n) for r in J.levels if r <= R), 0.0, R)
    if J.family == "uniform_ball":
        return LevelSum(J.scale * float(p) ** (min(R, J.radius_exp) * n), 0.0, R)
    if J.gamma <= -n:
        raise KernelError(f"exp_landscape needs gamma > -n (gamma={J.gamma}, n={n}); lower tail diverges")
    return _tail_sum(J, p, n, R, -1)


def total_mass(J, p, n):
    """``int_{Q_p^n} J`` as a :class:`LevelSum`."""
    if J.family == "table":
        return LevelSum(math.fsum(sphere_integral(J, r, p, n) for r in J.levels), 0.0, max(J.levels, default=0))
    if J.family == "uniform_ball":
        return ball_integral(J, J.radius_exp, p, n)
    # split at the peak of the sphere mass so both tails decay monotonically
    lower = ball_integral(J, 0, p, n)
    upper = _tail_sum(J, p, n, 1, +1)
    return LevelSum(lower.value + upper.value, lower.remainder + upper.remainder, upper.last_level)


def normalize(J, p, n):
    mass = total_mass(J, p, n).value
    if not mass > 0.0:
        raise KernelError("kernel has zero total mass")
    return replace(J, scale=J.scale / mass)


@dataclass(frozen=True)
class TruncatedKernel:
    """``J_N = J * 1_{B_N}`` seen from the grid ``G_N^n``.

    ``level_values[k]`` is ``J(p**r)`` for ``r = -N + 1 + k``; ``diag_mass`` is
    the integral over ``B_{-N}`` and ``j_N`` the integral over ``B_N``.
    """

    base: RadialKernel
    params: GridParams
    level_values: tuple
    diag_mass: float
    j_N: float

    @property
    def N(self):
        return self.params.N

    def radii(self):
        return range(-self.params.N + 1, self.params.N + 1)


def truncate(J, params):
    p, n, N = params.p, params.n, params.N
    diag = ball_integral(J, -N, p, n).value
    radii = range(-N + 1, N + 1)
    values = tuple(J.value(r, p) for r in radii)
    # j_N as the same level sum the operator uses, so row sums close exactly
    j_N = math.fsum([diag] + [sphere_integral(J, r, p, n) for r in radii])
    return TruncatedKernel(J, params, values, diag, j_N)
