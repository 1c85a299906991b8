"""Command-line front end: ``padr {validate,simulate,stationary,spectrum,converge} CONFIG``.

The configuration is a JSON document; see the README for the schema.  Exit
codes: 0 success, 1 usage or configuration error, 2 a structural hypothesis
fails, 3 the run aborted.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .approx import Constant, DigitRule, NormRule, convergence_study, project
from .dynamics import DynamicsError, IntegratorConfig, integrate
from .grid import GridError, GridParams
from .kernel import KernelError, RadialKernel, normalize, truncate
from .operator import DENSE_LIMIT, build, dense_matrix, spectrum, validate_qmatrix
from .reaction import HypothesisError, Reaction, as_polynomial
from .stationary import PatternSet, StationaryError, residual, solve, verify_bands

EXIT_OK, EXIT_USAGE, EXIT_HYPOTHESIS, EXIT_ABORT = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def _require(section, key, where):
    if key not in section:
        raise ConfigError(f"missing '{key}' in {where}")
    return section[key]


def parse_grid(cfg):
    g = _require(cfg, "grid", "config")
    try:
        return GridParams(int(_require(g, "p", "grid")), int(_require(g, "n", "grid")), int(_require(g, "N", "grid")))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from exc


def parse_kernel(cfg, p, n):
    k = dict(_require(cfg, "kernel", "config"))
    family = _require(k, "family", "kernel")
    scale = float(k.get("scale", 1.0))
    if family == "table":
        levels = {int(r): float(v) for r, v in _require(k, "levels", "kernel").items()}
        J = RadialKernel.table(levels, scale=scale)
    elif family == "uniform_ball":
        if "radius_exp" in k:
            r = int(k["radius_exp"])
        else:
            radius = float(_require(k, "radius", "kernel"))
            r = round(math.log(radius, p))
            if not math.isclose(float(p) ** r, radius, rel_tol=1e-12):
                raise ConfigError(f"kernel radius {radius} is not a power of p={p}")
        J = RadialKernel.uniform_ball(r, scale=scale)
    elif family == "exp_landscape":
        J = RadialKernel.exp_landscape(float(_require(k, "gamma", "kernel")), scale=scale)
    else:
        raise ConfigError(f"unknown kernel family {family!r}")
    if k.get("normalize", True):
        J = normalize(J, p, n)
    return J


def parse_reaction(cfg):
    r = dict(cfg.get("reaction", {}))
    f = r.get("f", r.get("coefficients", "cubic"))
    coeffs = tuple(as_polynomial(f).coef)
    return Reaction(
        coeffs,
        float(r.get("lambda", 6.0)),
        float(r.get("alpha_minus", -0.75)),
        float(r.get("alpha_plus", 0.75)),
        float(r.get("delta", 0.5)),
    )


def parse_integrator(cfg):
    s = dict(cfg.get("integrator", {}))
    return IntegratorConfig(
        method=str(s.get("method", "rk4")),
        dt=float(s.get("dt", 0.01)),
        T=float(s.get("T", 1.0)),
        record_every=int(s.get("record_every", 1)),
        picard_tol=float(s.get("picard_tol", 1e-13)),
        contractive=bool(s.get("contractive", False)),
    )


def parse_profile(rule):
    kind = _require(rule, "type", "profile")
    if kind == "constant":
        return Constant(float(_require(rule, "value", "profile")))
    if kind == "norm":
        return NormRule(
            {int(r): float(v) for r, v in _require(rule, "levels", "profile").items()},
            float(rule.get("below", 0.0)),
            float(rule.get("above", 0.0)),
            tuple(rule.get("center", ())),
        )
    if kind == "digit":
        return DigitRule(int(_require(rule, "L", "profile")), tuple(_require(rule, "table", "profile")), float(rule.get("outside", 0.0)))
    raise ConfigError(f"unknown profile type {kind!r}")


def parse_pattern(items, params):
    members = []
    for item in items:
        if isinstance(item, str):
            # digit string, slot 0 first, coordinates separated by '/'
            coords = []
            for part in item.split("/"):
                if len(part) != 2 * params.N or any(not ch.isdigit() or int(ch) >= params.p for ch in part):
                    raise ConfigError(f"bad digit string {item!r}")
                coords.append(sum(int(ch) * params.p**s for s, ch in enumerate(part)))
            if len(coords) != params.n:
                raise ConfigError(f"digit string {item!r} has {len(coords)} coordinates, grid has {params.n}")
            members.append(params.ordinal_of(coords))
        else:
            members.append(int(item))
    try:
        return PatternSet(params, frozenset(members))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def initial_state(cfg, params, seed):
    init = dict(cfg.get("initial", {"constant": 0.0}))
    if "pattern" in init:
        mask = parse_pattern(init["pattern"], params).mask()
        return np.where(mask, float(init.get("high", 1.0)), float(init.get("low", -1.0)))
    if "profile" in init:
        return project(parse_profile(init["profile"]), params)
    if "snapshot" in init:
        sp, u = io.read_snapshot(init["snapshot"])
        if sp != params:
            raise ConfigError("snapshot grid differs from the configured grid")
        return u
    if "constant" in init:
        return np.full(params.M, float(init["constant"]))
    if "random" in init:
        r = dict(init["random"])
        rng = np.random.default_rng(seed)
        return rng.uniform(float(r.get("low", -1.0)), float(r.get("high", 1.0)), params.M)
    raise ConfigError("initial needs one of pattern, profile, snapshot, constant, random")


class Context:
    def __init__(self, cfg, out_dir=None):
        self.cfg = cfg
        self.params = parse_grid(cfg)
        self.kernel = parse_kernel(cfg, self.params.p, self.params.n)
        self.rx = parse_reaction(cfg)
        self.seed = int(cfg.get("seed", 0))
        outputs = dict(cfg.get("outputs", {}))
        self.out = Path(out_dir or outputs.get("directory", "padr_out"))
        self.write_snapshots = bool(outputs.get("snapshots", False))
        self._op = None

    @property
    def op(self):
        if self._op is None:
            self._op = build(self.params, truncate(self.kernel, self.params))
        return self._op

    def path(self, name):
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name


def _print_kv(key, value):
    if isinstance(value, float):
        value = io.fmt(value)
    print(f"{key} = {value}")


def cmd_validate(ctx):
    op, rx = ctx.op, ctx.rx
    st = ctx.cfg.get("stationary", {})
    h = float(st["h"]) if "h" in st else None
    _print_kv("M", op.M)
    _print_kv("j_N", op.j_N)
    _print_kv("diag_mass", op.diag_coeff)
    rep = rx.conditions(h)
    if rep.checks.get("H4", (False,))[0]:
        _print_kv("u_minus", rx.u_minus)
        _print_kv("u_plus", rx.u_plus)
    try:
        _print_kv("lambda_min", rx.lambda_min)
    except ValueError as exc:
        print(f"lambda_min = unavailable ({exc})")
    _print_kv("h_max", rx.h_max)
    q = validate_qmatrix(op)
    rep.add("qmatrix", q.ok, f"min offdiag of -A {q.min_offdiag:.3g}, max row residual {q.max_row_residual:.3g}")
    if op.M <= DENSE_LIMIT:
        w = spectrum(op)
        _print_kv("spectrum_min", float(w[0]))
        _print_kv("spectrum_max", float(w[-1]))
    _print_kv("spectrum_bound", 2.0 * op.j_N)
    for name, (ok, detail) in rep.checks.items():
        print(f"{name}: {'pass' if ok else 'FAIL'} ({detail})")
    return EXIT_OK if rep.ok else EXIT_HYPOTHESIS


def _stationary_target(ctx):
    init = ctx.cfg.get("initial", {})
    st = dict(ctx.cfg.get("stationary", {}))
    items = st.get("pattern", init.get("pattern"))
    if items is None:
        raise ConfigError("a stationary target needs a pattern")
    pattern = parse_pattern(items, ctx.params)
    res = solve(pattern, ctx.op, ctx.rx, float(st.get("h", 0.0625)), float(st.get("tol", 1e-12)), int(st.get("max_iter", 1_000_000)))
    return pattern, res


def cmd_simulate(ctx):
    cfg = parse_integrator(ctx.cfg)
    u0 = initial_state(ctx.cfg, ctx.params, ctx.seed)
    target = None
    if ctx.cfg.get("integrator", {}).get("target") == "stationary":
        target = _stationary_target(ctx)[1].u_tilde
    traj = integrate(u0, ctx.op, ctx.rx, cfg, target)
    io.write_trajectory_ndjson(ctx.path("trajectory.ndjson"), traj)
    io.write_energy_csv(ctx.path("energy.csv"), traj)
    io.write_snapshot(ctx.path("final.padr"), ctx.params, traj.final)
    if ctx.write_snapshots:
        for k, u in enumerate(traj.snapshots):
            io.write_snapshot(ctx.path(f"snapshot_{k:06d}.padr"), ctx.params, u)
    print(f"wrote {len(traj.times)} records to {ctx.out}")
    return EXIT_OK


def cmd_stationary(ctx):
    pattern, res = _stationary_target(ctx)
    bands = verify_bands(res.u_tilde, pattern, ctx.rx)
    io.write_snapshot(ctx.path("stationary.padr"), ctx.params, res.u_tilde)
    meta = {
        "residual": residual(res.u_tilde, ctx.op, ctx.rx),
        "iterations": res.iterations,
        "contraction_rate": res.contraction_rate,
        "bands": {"ok": bands.ok, "margin_inside": _finite(bands.margin_inside), "margin_outside": _finite(bands.margin_outside)},
    }
    with open(ctx.path("stationary.json"), "w", encoding="utf-8") as fh:
        fh.write(io.to_json(meta) + "\n")
    print(io.to_json(meta))
    return EXIT_OK if bands.ok else EXIT_HYPOTHESIS


def _finite(x):
    return x if math.isfinite(x) else None


def cmd_spectrum(ctx):
    w = spectrum(ctx.op)
    io.write_spectrum_csv(ctx.path("spectrum.csv"), w)
    if ctx.cfg.get("outputs", {}).get("matrix", False):
        io.write_matrix_csv(ctx.path("matrix.csv"), dense_matrix(ctx.op))
    print(",".join(io.fmt(x) for x in w) if len(w) <= 16 else f"{len(w)} eigenvalues in [{w[0]:.6g}, {w[-1]:.6g}]")
    return EXIT_OK


def cmd_converge(ctx):
    conv = dict(_require(ctx.cfg, "converge", "config"))
    N_list = [int(x) for x in _require(conv, "N_list", "converge")]
    profile = parse_profile(_require(conv, "profile", "converge"))
    rows = convergence_study(profile, ctx.kernel, ctx.rx, parse_integrator(ctx.cfg), ctx.params.p, ctx.params.n, N_list)
    io.write_convergence_csv(ctx.path("convergence.csv"), rows)
    for r in rows:
        print(f"N={r.N_coarse}->{r.N_fine}: sup_gap={io.fmt(r.sup_gap)} semigroup_gap={io.fmt(r.semigroup_gap)}")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "stationary": cmd_stationary,
    "spectrum": cmd_spectrum,
    "converge": cmd_converge,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="padr", description="p-adic reaction-ultradiffusion runs")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="JSON configuration file")
        sp.add_argument("--out", help="output directory (overrides outputs.directory)")
    return ap


def _abort(ctx_out, exc):
    diag = {"error": type(exc).__name__, "message": str(exc)}
    if hasattr(exc, "step"):
        diag["step"] = exc.step
    print(io.to_json(diag), file=sys.stderr)
    if ctx_out is not None:
        try:
            ctx_out.mkdir(parents=True, exist_ok=True)
            (ctx_out / "error.json").write_text(io.to_json(diag) + "\n", encoding="utf-8")
        except OSError:
            pass
    return EXIT_ABORT


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        ctx = Context(raw, args.out)
    except (OSError, json.JSONDecodeError, ConfigError, GridError, KernelError, TypeError, ValueError) as exc:
        print(f"padr: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](ctx)
    except HypothesisError as exc:
        print(f"padr: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except ConfigError as exc:
        print(f"padr: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DynamicsError, StationaryError, RuntimeError, ValueError) as exc:
        return _abort(ctx.out, exc)


if __name__ == "__main__":
    sys.exit(main())
