"""Bistable reaction terms ``f`` with double-well potential ``W`` (``W' = f``).

Only polynomial ``f`` is supported.  The constants that make the banded
fixed-point construction work are: the outer bands ``[-1, alpha_minus]`` and
``[alpha_plus, 1]`` on which ``f' >= delta``, the coupling ``lam`` large enough
for the band inequalities, and the step bound ``h_max``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

_ROOT_TOL = 1e-9


class HypothesisError(ValueError):
    """A structural assumption on the reaction term fails; ``name`` says which."""

    def __init__(self, name, detail):
        super().__init__(f"{name} failed: {detail}")
        self.name = name
        self.detail = detail


def as_polynomial(f):
    if isinstance(f, Polynomial):
        return f
    if isinstance(f, Reaction):
        return f.f
    if isinstance(f, str):
        if f != "cubic":
            raise ValueError(f"unknown reaction {f!r}")
        return CUBIC
    return Polynomial(np.asarray(f, dtype=np.float64))


CUBIC = Polynomial([0.0, -1.0, 0.0, 1.0])


def _real_roots(poly, lo=-np.inf, hi=np.inf):
    """Sorted distinct real roots in ``[lo, hi]``, polished by bracketing."""
    poly = poly.trim()
    if poly.degree() < 1:
        return []
    out = []
    for z in poly.roots():
        if abs(z.imag) > 1e-7 * max(1.0, abs(z.real)):
            continue
        x = float(z.real)
        if lo - _ROOT_TOL <= x <= hi + _ROOT_TOL:
            out.append(min(max(x, lo), hi))
    out.sort()
    merged = []
    for x in out:
        if not merged or x - merged[-1] > 1e-7:
            merged.append(x)
    return merged


def _bracket_root(g, a, b):
    fa, fb = g(a), g(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        return None
    return brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


@dataclass
class HypothesisReport:
    checks: dict = field(default_factory=dict)  # name -> (ok, detail)

    def add(self, name, ok, detail):
        self.checks[name] = (bool(ok), detail)

    @property
    def ok(self):
        return all(ok for ok, _ in self.checks.values())

    def failures(self):
        return [name for name, (ok, _) in self.checks.items() if not ok]

    def raise_if_failed(self):
        for name, (ok, detail) in self.checks.items():
            if not ok:
                raise HypothesisError(name, detail)
        return self

    def __bool__(self):
        return self.ok


def _g(f, lam):
    return Polynomial([0.0, 1.0]) + lam * f


def _monotone_pieces(f, lam):
    """Critical points of ``g = u + lam f`` (sign changes of ``g'``)."""
    g = _g(f, lam)
    dg = g.deriv()
    crit = []
    for x in _real_roots(dg):
        # a sign change needs the derivative to cross, not touch
        eps = 1e-6 * max(1.0, abs(x))
        if dg(x - eps) * dg(x + eps) < 0:
            crit.append(x)
    return g, crit


def _roots_of_g(f, lam):
    g, crit = _monotone_pieces(f, lam)
    span = 1.0 + sum(abs(c) for c in g.coef) / max(abs(g.coef[-1]), 1e-300)
    edges = [-span] + crit + [span]
    roots = []
    for a, b in zip(edges[:-1], edges[1:]):
        r = _bracket_root(g, a, b)
        if r is not None and (not roots or r - roots[-1] > 1e-12):
            roots.append(r)
    return g, crit, roots


def check_hypotheses(f, lam=None):
    """Evaluate the structural hypotheses on ``f`` (and on ``u + lam f`` if ``lam`` given).

    ``H1`` (twice differentiable) holds for every polynomial.  ``H2``: the real
    zeros are exactly ``{-1, 0, 1}``.  ``H3``: slope signs ``+, -, +`` there.
    ``H4``: ``u + lam f`` has three zeros and three monotone pieces, with the
    extreme zeros strictly inside ``(-1, 1)``.
    """
    f = as_polynomial(f)
    rep = HypothesisReport()
    rep.add("H1", True, "polynomial")
    zeros = _real_roots(f)
    want = [-1.0, 0.0, 1.0]
    ok2 = len(zeros) == 3 and all(abs(a - b) < 1e-7 for a, b in zip(zeros, want))
    rep.add("H2", ok2, f"real zeros {zeros}")
    df = f.deriv()
    slopes = (float(df(-1.0)), float(df(0.0)), float(df(1.0)))
    rep.add("H3", slopes[0] > 0 and slopes[1] < 0 and slopes[2] > 0, f"f'(-1,0,1) = {slopes}")
    if lam is not None:
        _, crit, roots = _roots_of_g(f, lam)
        ok4 = len(roots) == 3 and len(crit) == 2 and -1 < roots[0] < 0 < roots[-1] < 1
        rep.add("H4", ok4, f"lam={lam}: zeros {roots}, turning points {crit}")
    return rep


def extreme_roots(f, lam):
    """``(u_minus, u_plus)``: the outer zeros of ``u + lam f``."""
    f = as_polynomial(f)
    rep = check_hypotheses(f, lam)
    if not rep.checks["H4"][0]:
        raise HypothesisError("H4", rep.checks["H4"][1])
    _, _, roots = _roots_of_g(f, lam)
    return roots[0], roots[-1]


def choose_constants(f, delta, round_to=None):
    """Innermost ``(alpha_minus, alpha_plus)`` with ``f' >= delta`` on both outer bands.

    With ``round_to`` the thresholds are moved outward to the next multiple,
    e.g. ``0.7071 -> 0.75`` for ``round_to=0.05``.
    """
    f = as_polynomial(f)
    if not delta > 0:
        raise ValueError("delta must be positive")
    shifted = f.deriv() - delta
    out = []
    for end, inner in ((1.0, 0.0), (-1.0, 0.0)):
        if shifted(end) < 0:
            raise ValueError(f"no admissible alpha: f'({end:+g}) < delta={delta}")
        lo, hi = (inner, end) if end > 0 else (end, inner)
        cuts = _real_roots(shifted, lo, hi)
        if end > 0:
            a = max(cuts, default=inner)
        else:
            a = min(cuts, default=inner)
        if not (0.0 < abs(a) < 1.0):
            raise ValueError(f"no admissible alpha in the band toward {end:+g} for delta={delta}")
        out.append(a)
    a_plus, a_minus = out
    if round_to:
        a_plus = math.ceil(a_plus / round_to - 1e-9) * round_to
        a_minus = math.floor(a_minus / round_to + 1e-9) * round_to
        if not (0 < a_plus < 1 and -1 < a_minus < 0):
            raise ValueError("rounding pushed alpha outside (-1, 1)")
    return a_minus, a_plus


def lambda_min(f, alpha_minus, alpha_plus):
    """Smallest ``lam`` for which both band inequalities hold."""
    f = as_polynomial(f)
    fm, fp = float(f(alpha_minus)), float(f(alpha_plus))
    if not (fp < 0 < fm):
        raise ValueError(f"need f(alpha_plus) < 0 < f(alpha_minus), got {fp}, {fm}")
    return max(-alpha_minus / fm, (1.0 + alpha_plus) / -fp)


def max_slope_on_bands(f, alpha_minus, alpha_plus):
    f = as_polynomial(f)
    df = f.deriv()
    pts = [-1.0, alpha_minus, alpha_plus, 1.0]
    pts += _real_roots(df.deriv(), -1.0, alpha_minus) + _real_roots(df.deriv(), alpha_plus, 1.0)
    return max(float(df(x)) for x in pts)


def max_abs_slope(f, lo=-1.0, hi=1.0):
    df = as_polynomial(f).deriv()
    pts = [lo, hi] + _real_roots(df.deriv(), lo, hi)
    return max(abs(float(df(x))) for x in pts)


def step_bound(f, lam, alpha_minus, alpha_plus):
    """``h_max = 1 / (1 + lam * max f')`` over the outer bands."""
    return 1.0 / (1.0 + lam * max_slope_on_bands(f, alpha_minus, alpha_plus))


@dataclass(frozen=True)
class Reaction:
    """``coefficients`` are ascending powers of ``f``; ``lam`` is the coupling."""

    coefficients: tuple = (0.0, -1.0, 0.0, 1.0)
    lam: float = 6.0
    alpha_minus: float = -0.75
    alpha_plus: float = 0.75
    delta: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError("lam must be finite and >= 0")

    @classmethod
    def cubic(cls, lam=6.0, alpha=0.75, delta=0.5):
        return cls(tuple(CUBIC.coef), lam, -alpha, alpha, delta)

    @cached_property
    def f(self):
        return Polynomial(self.coefficients)

    @cached_property
    def df(self):
        return self.f.deriv()

    @cached_property
    def W(self):
        """Antiderivative of ``f`` with ``W(1) = 0``."""
        w = self.f.integ()
        return w - float(w(1.0))

    def eval_f(self, u):
        return self.f(np.asarray(u, dtype=np.float64))

    def eval_df(self, u):
        return self.df(np.asarray(u, dtype=np.float64))

    def eval_W(self, u):
        return self.W(np.asarray(u, dtype=np.float64))

    @cached_property
    def extreme_roots(self):
        return extreme_roots(self.f, self.lam)

    @property
    def u_minus(self):
        return self.extreme_roots[0]

    @property
    def u_plus(self):
        return self.extreme_roots[1]

    @cached_property
    def h_max(self):
        return step_bound(self.f, self.lam, self.alpha_minus, self.alpha_plus)

    @cached_property
    def lambda_min(self):
        return lambda_min(self.f, self.alpha_minus, self.alpha_plus)

    @cached_property
    def stability_slope(self):
        """``max |f'|`` on ``[-1, 1]``."""
        return max_abs_slope(self.f)

    def conditions(self, h=None):
        """Hypotheses plus the band conditions for these constants (and step ``h``)."""
        rep = check_hypotheses(self.f, self.lam if self.lam > 0 else None)
        am, ap, lam = self.alpha_minus, self.alpha_plus, self.lam
        f, df = self.f, self.df
        slope_min = min(
            float(df(x))
            for x in [-1.0, am, ap, 1.0]
            + _real_roots(df.deriv(), -1.0, am)
            + _real_roots(df.deriv(), ap, 1.0)
        )
        band_ok = -1 < am < 0 < ap < 1 and self.delta > 0 and slope_min >= self.delta
        if rep.checks.get("H4", (False,))[0]:
            um, up = self.extreme_roots
            order_ok = um < am and ap < up
            detail = f"u-={um:.6g} < a-={am} < 0 < a+={ap} < u+={up:.6g}; min f' on bands {slope_min:.6g} >= delta={self.delta}"
        else:
            order_ok = False
            detail = "extreme roots unavailable (H4 failed)"
        rep.add("C5", band_ok and order_ok, detail)
        c6 = (1.0 + ap) + lam * float(f(ap))
        rep.add("C6", c6 <= 0, f"(1+a+) + lam f(a+) = {c6:.6g} <= 0")
        c7 = am + lam * float(f(am))
        rep.add("C7", c7 >= 0, f"a- + lam f(a-) = {c7:.6g} >= 0")
        if h is not None:
            rep.add("step", 0 < h < self.h_max, f"0 < h={h} < h_max={self.h_max:.6g}")
        return rep

    def to_dict(self):
        return {
            "coefficients": list(self.coefficients),
            "lambda": self.lam,
            "alpha_minus": self.alpha_minus,
            "alpha_plus": self.alpha_plus,
            "delta": self.delta,
        }
