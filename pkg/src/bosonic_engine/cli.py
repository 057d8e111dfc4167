"""Command-line entry point: simulate, sweep, optimize, validate, tur."""

from __future__ import annotations

import argparse
import json
import math
import sys

from .errors import ConfigError, EngineError
from .exact import (
    DEFAULT_DIMS_CAP,
    Method,
    TruncationConfig,
    adaptive_truncation,
    exact_moments,
    two_point_distribution,
)
from .fock import CouplingSpec, EngineParams
from .optimize import optimize_frequency_4th, optimize_nm, optimize_xmax
from .perturbative import (
    VARIANTS,
    delta_coefficient,
    moments_2nd,
    moments_4th,
    resolve_theta,
    work_distribution_2nd,
    work_distribution_4th,
)
from .sweep import emit_csv, parse_config, run_sweep, validate_convergence
from .thermo import classify_regime, tur_report


def _physics_flags(p, required=True):
    p.add_argument("--n", type=int, required=required)
    p.add_argument("--m", type=int, required=required)
    p.add_argument("--omega-a", type=float, required=required)
    p.add_argument("--omega-b", type=float, required=required)
    p.add_argument("--beta-a", type=float, required=required)
    p.add_argument("--beta-b", type=float, required=required)


def _coupling_flags(p, alpha_only=False):
    g = p.add_mutually_exclusive_group(required=True)
    if not alpha_only:
        g.add_argument("--theta", type=float)
    g.add_argument("--alpha", type=float)
    p.add_argument("--order", type=int, choices=(2, 4), default=None)


def _params(args) -> EngineParams:
    if getattr(args, "theta", None) is not None:
        coupling = CouplingSpec.theta(args.theta)
    else:
        coupling = CouplingSpec.alpha(args.alpha, args.order)
    return EngineParams(args.n, args.m, args.omega_a, args.omega_b, args.beta_a,
                        args.beta_b, coupling)


def _clean(obj):
    """Make a result JSON-safe (nan/inf become strings, enums their values)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "value") and hasattr(obj, "name"):
        return obj.value
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def _print(obj):
    json.dump(_clean(obj), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _moment_dict(m):
    return {"mean_w": m.mean_w, "second_w": m.second_w, "var_w": m.var_w,
            "mean_qh": m.mean_qh, "mean_qc": m.mean_qc,
            "sigma": m.entropy_production, "efficiency": m.efficiency,
            "snr": m.snr, "method": m.method}


def cmd_simulate(args):
    params = _params(args)
    method = Method(args.method)
    if method is Method.ORACLE:
        theta = resolve_theta(params, params.coupling.order or 2)
        trunc = adaptive_truncation(params, dims_cap=args.dims_cap, theta=theta)
        if args.dims_a or args.dims_b:
            trunc = TruncationConfig(args.dims_a or trunc.dim_a, args.dims_b or trunc.dim_b,
                                     dims_cap=args.dims_cap)
        dist = two_point_distribution(params, trunc, theta)
        moments = exact_moments(dist, params)
        extra = {"dims": [trunc.dim_a, trunc.dim_b], "off_line_mass": dist.off_line_mass,
                 "leakage": dist.leakage}
    elif method is Method.PERT2:
        theta = resolve_theta(params, params.coupling.order or 2)
        dist = work_distribution_2nd(params, theta)
        moments = moments_2nd(params, theta)
        extra = {}
    else:
        theta = resolve_theta(params, 4)
        dist = work_distribution_4th(params, theta)
        moments = moments_4th(params, theta)
        extra = {}
    _print({"theta": theta, "quantum_w": params.quantum,
            "regime": classify_regime(params).regime,
            "distribution": [[k, p] for k, p in dist.points],
            "moments": _moment_dict(moments), **extra})


def cmd_sweep(args):
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    table = run_sweep(parse_config(text), args.jobs)
    emit_csv(table, args.out)
    errors = sum(1 for e in table.column("error") if e)
    print(f"wrote {len(table)} rows to {args.out} ({errors} with errors)", file=sys.stderr)


def cmd_optimize(args):
    objective = args.objective.replace("-", "_")
    if args.family == "nm":
        base = EngineParams(1, 1, args.omega_a, args.omega_b, args.beta_a, args.beta_b)
        res = optimize_nm(base, args.alpha, args.n_max, args.m_max, objective)
    elif args.family == "xmax":
        res = optimize_xmax(args.x, args.y, args.beta_omega_a, args.alpha)
    else:
        variant = "v21" if args.family == "freq21" else "v12"
        res = optimize_frequency_4th(variant, args.beta_a, args.y, args.alpha, objective)
    _print({"objective": res.objective, "argmax": res.argmax, "value": res.value,
            "method": res.method})


def cmd_validate(args):
    coupling = CouplingSpec()
    params = EngineParams(args.n, args.m, args.omega_a, args.omega_b, args.beta_a,
                          args.beta_b, coupling)
    rep = validate_convergence(params, args.theta_max, args.halvings, dims_cap=args.dims_cap)
    _print({"theta_grid": rep.theta_grid, "errors_pert2": rep.errors_pert2,
            "errors_pert4": rep.errors_pert4,
            "fitted_order_pert2": rep.fitted_order_pert2,
            "fitted_order_pert4": rep.fitted_order_pert4, "accepted": rep.accepted})
    return 0 if rep.accepted else 4


def cmd_tur(args):
    params = _params(args)
    order = args.order or 2
    if order == 2:
        moments = moments_2nd(params)
        delta = None
    else:
        moments = moments_4th(params)
        delta = delta_coefficient(params.occupations(), VARIANTS[(params.n, params.m)])
    rep = tur_report(params, moments, alpha=args.alpha, delta=delta)
    _print({k: getattr(rep, k) for k in rep.__dataclass_fields__})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bosonic-engine",
        description="Work statistics of two-stroke engines with polynomial mode coupling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one parameter point")
    _physics_flags(p)
    _coupling_flags(p)
    p.add_argument("--method", choices=[m.value for m in Method], default="pert2")
    p.add_argument("--dims-a", type=int, default=None)
    p.add_argument("--dims-b", type=int, default=None)
    p.add_argument("--dims-cap", type=int, default=DEFAULT_DIMS_CAP)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a JSON-configured sweep to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize", help="optimal working points")
    p.add_argument("--objective", choices=("mean-work", "snr"), default="mean-work")
    p.add_argument("--family", choices=("nm", "xmax", "freq21", "freq12"), required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--omega-a", type=float, default=1.0)
    p.add_argument("--omega-b", type=float)
    p.add_argument("--beta-a", type=float)
    p.add_argument("--beta-b", type=float)
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--m-max", type=int, default=10)
    p.add_argument("--x", type=float)
    p.add_argument("--y", type=float)
    p.add_argument("--beta-omega-a", type=float)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("validate", help="perturbative orders against the oracle")
    _physics_flags(p)
    p.add_argument("--theta-max", type=float, required=True)
    p.add_argument("--halvings", type=int, default=3)
    p.add_argument("--dims-cap", type=int, default=DEFAULT_DIMS_CAP)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("tur", help="TUR bounds at one point")
    _physics_flags(p)
    _coupling_flags(p, alpha_only=True)
    p.set_defaults(func=cmd_tur)
    return parser


_REQUIRED = {
    "nm": ("omega_b", "beta_a", "beta_b"),
    "xmax": ("x", "y", "beta_omega_a"),
    "freq21": ("beta_a", "y"),
    "freq12": ("beta_a", "y"),
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which is also our config-error code
        return int(exc.code or 0)
    if args.command == "optimize":
        missing = [f"--{k.replace('_', '-')}" for k in _REQUIRED[args.family]
                   if getattr(args, k) is None]
        if missing:
            print(f"error: --family {args.family} needs {', '.join(missing)}",
                  file=sys.stderr)
            return ConfigError.exit_code
    try:
        rc = args.func(args)
    except EngineError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return int(rc or 0)


if __name__ == "__main__":
    sys.exit(main())
