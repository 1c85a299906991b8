"""Time integration of ``du/dt = -(A u + lam f(u))`` on G_N^n.

The right-hand side is the gradient of the free energy up to the uniform
factor ``p**(N n)``; integrating without that factor keeps time units equal
across resolutions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import energy
from .operator import _check_state, matvec_fast, semigroup_apply

BLOWUP_LIMIT = 10.0
MAX_PICARD_SWEEPS = 100
_RK4_GUARD_FACTOR = 1.4
METHODS = ("euler", "rk4", "picard")


class DynamicsError(RuntimeError):
    pass


class BlowUpError(DynamicsError):
    def __init__(self, step, t, value):
        super().__init__(f"state left the safe range at step {step} (t={t:.6g}): max|u| = {value}")
        self.step = step
        self.t = t


class PicardError(DynamicsError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"
    dt: float = 0.01
    T: float = 1.0
    record_every: int = 1
    picard_tol: float = 1e-13
    contractive: bool = False
    picard_nodes: int = 4  # Gauss-Lobatto points per subinterval, both ends included

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("dt and T must be positive")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be >= 1")
        if self.picard_nodes < 2:
            raise ValueError("picard_nodes must be >= 2")

    @property
    def steps(self):
        return max(1, int(round(self.T / self.dt)))

    def stability_number(self, op, rx):
        """``dt * (2 j_N + lam max|f'|)``: Euler needs < 2, RK4 < 2/1.4."""
        return self.dt * (2.0 * op.j_N + rx.lam * rx.stability_slope)

    def check(self, op, rx):
        if self.method in ("euler", "rk4"):
            limit = 2.0 if self.method == "euler" else 2.0 / _RK4_GUARD_FACTOR
            s = self.stability_number(op, rx)
            if s >= limit:
                raise ValueError(
                    f"dt={self.dt} violates the explicit stability guard for {self.method}: "
                    f"dt*(2 j_N + lam max|f'|) = {s:.6g} >= {limit:.6g}"
                )
        if self.contractive and not self.dt < rx.h_max:
            raise ValueError(f"contractive run needs dt < h_max = {rx.h_max:.6g}, got {self.dt}")


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    energy_trace: list = field(default_factory=list)
    sup_distance_to_target: list | None = None
    max_energy_increase: float = 0.0  # over every step, not only recorded ones
    steps: int = 0

    @property
    def final(self):
        return self.snapshots[-1]

    def record(self, t, u, e, target):
        self.times.append(float(t))
        self.snapshots.append(u.copy())
        self.energy_trace.append(e)
        if target is not None:
            self.sup_distance_to_target.append(float(np.abs(u - target).max()))

    def energy_nonincreasing(self, rtol=1e-10):
        tot = [e.total for e in self.energy_trace]
        return all(b <= a + rtol * (1.0 + abs(a)) for a, b in zip(tot[:-1], tot[1:]))


def rhs(u, op, rx, Au=None):
    if Au is None:
        Au = matvec_fast(op, u)
    return -(Au + rx.lam * rx.eval_f(u))


def _guard(u, step, t):
    m = float(np.max(np.abs(u)))
    if not m <= BLOWUP_LIMIT:  # also catches NaN
        raise BlowUpError(step, t, m)


def _step_euler(u, op, rx, dt, Au):
    return u + dt * rhs(u, op, rx, Au)


def _step_rk4(u, op, rx, dt, Au):
    k1 = rhs(u, op, rx, Au)
    k2 = rhs(u + 0.5 * dt * k1, op, rx)
    k3 = rhs(u + 0.5 * dt * k2, op, rx)
    k4 = rhs(u + dt * k3, op, rx)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _lobatto_nodes(m):
    """``m`` Gauss-Lobatto points on ``[0, 1]``."""
    interior = np.polynomial.legendre.Legendre.basis(m - 1).deriv().roots()
    x = np.concatenate([[-1.0], np.sort(interior.real), [1.0]])
    return 0.5 * (x + 1.0)


def _lagrange_matrix(nodes, x):
    """``L[q, k]`` = k-th Lagrange basis through ``nodes`` evaluated at ``x[q]``."""
    L = np.ones((len(x), len(nodes)))
    for k, xk in enumerate(nodes):
        for j, xj in enumerate(nodes):
            if j != k:
                L[:, k] *= (x - xj) / (xk - xj)
    return L


class _MildStepper:
    """One subinterval of the mild (variation-of-constants) form by collocation.

    The reaction term along the subinterval is replaced by its interpolant at
    the Lobatto nodes; the convolution with the semigroup is evaluated by Gauss
    quadrature, and the node values are iterated to a fixed point.
    """

    def __init__(self, op, rx, dt, nodes, tol):
        self.op, self.rx, self.dt, self.tol = op, rx, dt, tol
        self.c = _lobatto_nodes(nodes) * dt
        gx, gw = np.polynomial.legendre.leggauss(nodes + 1)
        self.quad = []
        for s in self.c[1:]:
            sig = 0.5 * s * (gx + 1.0)
            self.quad.append((s - sig, 0.5 * s * gw, _lagrange_matrix(self.c, sig)))

    def __call__(self, u0):
        # a diverging sweep overflows before the sweep limit; report it as PicardError
        with np.errstate(over="ignore", invalid="ignore"):
            return self._solve(u0)

    def _solve(self, u0):
        op, lam = self.op, self.rx.lam
        free = [semigroup_apply(op, u0, s) for s in self.c[1:]]
        if lam == 0.0:
            return free[-1], 1
        nodes = [u0] + [u0.copy() for _ in self.c[1:]]
        prev_change = None
        rate = float("nan")
        for sweep in range(1, MAX_PICARD_SWEEPS + 1):
            react = np.stack([-lam * self.rx.eval_f(v) for v in nodes])
            new = [u0]
            for i, (lag, w, L) in enumerate(self.quad):
                acc = free[i].copy()
                vals = L @ react
                for q in range(len(w)):
                    acc += w[q] * semigroup_apply(op, vals[q], lag[q])
                new.append(acc)
            change = max(float(np.abs(a - b).max()) for a, b in zip(new[1:], nodes[1:]))
            nodes = new
            if not math.isfinite(change):
                break
            scale = 1.0 + max(float(np.abs(v).max()) for v in nodes)
            if change <= self.tol * scale:
                return nodes[-1], sweep
            rate = change / prev_change if prev_change else float("nan")
            prev_change = change
        raise PicardError(
            f"Picard iteration did not converge in {MAX_PICARD_SWEEPS} sweeps "
            f"(last change {change:.3g}, contraction estimate {rate:.3g}; "
            f"a priori lam*max|f'|*dt = {lam * self.rx.stability_slope * self.dt:.3g})"
        )


def integrate(u0, op, rx, cfg, target=None):
    """Integrate from ``u0`` to ``cfg.T`` and record every ``cfg.record_every`` steps.

    The energy is evaluated after every step; the largest increase seen is kept
    in ``Trajectory.max_energy_increase``.
    """
    u = _check_state(op, u0).copy()
    if not np.all(np.isfinite(u)):
        raise ValueError("initial state has non-finite entries")
    cfg.check(op, rx)
    if target is not None:
        target = _check_state(op, target)
    traj = Trajectory(sup_distance_to_target=[] if target is not None else None)
    n_steps = cfg.steps
    dt = cfg.T / n_steps
    mild = _MildStepper(op, rx, dt, cfg.picard_nodes, cfg.picard_tol) if cfg.method == "picard" else None
    Au = matvec_fast(op, u)
    e = energy(u, op, rx, Au)
    traj.record(0.0, u, e, target)
    for k in range(1, n_steps + 1):
        if cfg.method == "euler":
            u = _step_euler(u, op, rx, dt, Au)
        elif cfg.method == "rk4":
            u = _step_rk4(u, op, rx, dt, Au)
        else:
            u, _ = mild(u)
        t = k * dt
        _guard(u, k, t)
        Au = matvec_fast(op, u)
        e_new = energy(u, op, rx, Au)
        traj.max_energy_increase = max(traj.max_energy_increase, (e_new.total - e.total) / (1.0 + abs(e.total)))
        e = e_new
        if k % cfg.record_every == 0 or k == n_steps:
            traj.record(t, u, e, target)
    traj.steps = n_steps
    return traj


def picard_mild(u0, op, rx, cfg, target=None):
    """``integrate`` with the mild-solution collocation stepper."""
    if cfg.method != "picard":
        cfg = IntegratorConfig("picard", cfg.dt, cfg.T, cfg.record_every, cfg.picard_tol, cfg.contractive, cfg.picard_nodes)
    return integrate(u0, op, rx, cfg, target)


@dataclass
class ComparisonReport:
    ok: bool
    worst_margin: float
    worst_time: float
    worst_index: int
    advisory: str | None = None

    def __bool__(self):
        return self.ok


def comparison_check(u0, v0, op, rx, cfg, tol=1e-9):
    """Run both states and track ``min_k (u_k - v_k)`` over the recorded times."""
    u0 = _check_state(op, u0)
    v0 = _check_state(op, v0)
    if np.any(u0 < v0):
        raise ValueError("comparison needs u0 >= v0 entrywise")
    tu = integrate(u0, op, rx, cfg)
    tv = integrate(v0, op, rx, cfg)
    worst, when, where = math.inf, 0.0, -1
    for t, a, b in zip(tu.times, tu.snapshots, tv.snapshots):
        d = a - b
        k = int(np.argmin(d))
        if d[k] < worst:
            worst, when, where = float(d[k]), t, k
    advisory = None
    if op.params.N < 2:
        advisory = "ordering is only guaranteed on large enough grids; N < 2 here"
    return ComparisonReport(worst >= -tol, worst, when, where, advisory)


def envelope_bounds(u_tilde, eps, beta, t):
    """``(u_tilde + eps e^{-beta t}, u_tilde - eps e^{-beta t})``."""
    shift = eps * math.exp(-beta * t)
    u_tilde = np.asarray(u_tilde, dtype=np.float64)
    return u_tilde + shift, u_tilde - shift


@dataclass
class EnvelopeCertificate:
    ok: bool
    min_upper_defect: float  # must be >= -tol
    max_lower_defect: float  # must be <= tol
    failing_sample: tuple | None  # (t, which, ordinal)

    def __bool__(self):
        return self.ok


def certify_envelope(u_tilde, eps, beta, op, rx, t_samples=range(51), tol=1e-9):
    """Check that the shifted profiles are super/sub-solutions at the sampled times.

    The parabolic defect ``d/dt w + A w + lam f(w)`` must be ``>= 0`` for the
    upper envelope and ``<= 0`` for the lower one.
    """
    u_tilde = _check_state(op, u_tilde)
    if not (eps > 0 and beta > 0):
        raise ValueError("eps and beta must be positive")
    worst_up, worst_lo, failing = math.inf, -math.inf, None
    for t in t_samples:
        up, lo = envelope_bounds(u_tilde, eps, beta, t)
        rate = beta * eps * math.exp(-beta * t)
        d_up = -rate + matvec_fast(op, up) + rx.lam * rx.eval_f(up)
        d_lo = rate + matvec_fast(op, lo) + rx.lam * rx.eval_f(lo)
        k, j = int(np.argmin(d_up)), int(np.argmax(d_lo))
        if d_up[k] < worst_up:
            worst_up = float(d_up[k])
            if worst_up < -tol and failing is None:
                failing = (float(t), "upper", k)
        if d_lo[j] > worst_lo:
            worst_lo = float(d_lo[j])
            if worst_lo > tol and failing is None:
                failing = (float(t), "lower", j)
    return EnvelopeCertificate(failing is None, worst_up, worst_lo, failing)


__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "integrate",
    "picard_mild",
    "comparison_check",
    "envelope_bounds",
    "certify_envelope",
    "DynamicsError",
    "BlowUpError",
    "PicardError",
]
