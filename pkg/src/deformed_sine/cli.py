"""Command-line interface: ``deformed-sine <command> [options]``.

Every command writes its tables (CSV), reports (JSON), a plot script with its
rendered PNG, and a ``manifest.json`` into ``--out-dir``.  Exit status is 0 on
success, 1 when a verification threshold fails and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import classical_pv, pde_lab, scattering, zs
from .config import ConfigError, load_config
from .fredholm import conjugated_determinant, interval_determinant, map_ordered
from .report import RunManifest, emit_report, jsonable, versions, write_manifest
from .weights import (DEFAULT_TRUNCATION_TOL, PROFILE_FAMILIES, WEIGHT_FAMILIES, ProfileSpec,
                      parse_weight)

DEFAULT_THRESHOLDS = {
    "zs": {"zs_order_min": 1.7, "zs_order_max": 2.3, "second_log_derivative": 1e-4,
           "symmetry": 1e-8, "det_U": 1e-8, "self_consistency": 1e-8},
    "trace": {"orthogonality": 1e-6, "beta": 1e-6, "gamma": 1e-6},
    "pde": {"order_min": 1.7, "order_max": 2.3},
    "scattering": {"sup_error": 5e-3, "W0": 1e-10},
    "classical": {"residual1": 1e-6, "log_residual": 1e-6},
    "calibrate-constants": {"distance": 1e-3},
}


class UsageError(Exception):
    pass


def _pair(text):
    parts = [float(v) for v in str(text).replace(",", " ").split()]
    if len(parts) != 2 or not parts[0] < parts[1]:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi' with lo < hi, got {text!r}")
    return parts


def _floats(text):
    try:
        return [float(v) for v in str(text).replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _threshold(text):
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    return name.strip(), float(value)


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="flat TOML file with option defaults")
    p.add_argument("--out-dir", default="deformed_sine_out", help="directory for all outputs")
    p.add_argument("--order", type=int, default=16, help="Gauss-Legendre order per panel")
    p.add_argument("--panels", type=int, default=None, help="override the panel count")
    p.add_argument("--quad-tol", type=float, default=DEFAULT_TRUNCATION_TOL,
                   help="weight truncation tolerance")
    p.add_argument("--workers", type=int, default=1, help="threads for independent evaluations")
    p.add_argument("--no-figures", action="store_true", help="emit plot scripts but do not render")
    p.add_argument("--threshold", type=_threshold, action="append", default=[],
                   metavar="NAME=VALUE", help="override a verification threshold")
    return p


def _weight_opts():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--weight", default="fermi", choices=WEIGHT_FAMILIES[:-1] + ("fermi_factor",))
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--y", type=float, default=0.0)
    return p


def _profile_opts(y_range=(-2.0, 2.0), s_range=(0.2, 3.0), hy=0.05, hs=0.02):
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--profile", default="fermi_factor",
                   choices=[f for f in PROFILE_FAMILIES if f != "scattering_derived"])
    p.add_argument("--y-range", type=_pair, default=list(y_range))
    p.add_argument("--s-range", type=_pair, default=list(s_range))
    p.add_argument("--hy", type=float, default=hy)
    p.add_argument("--hs", type=float, default=hs)
    return p


def _scattering_opts():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--f", default="gaussian", choices=["gaussian"])
    p.add_argument("--center", type=float, default=0.0)
    p.add_argument("--amp", type=float, default=1.0)
    p.add_argument("--y-range", type=_pair, default=[-2.0, 2.0])
    p.add_argument("--y-step", type=float, default=0.25)
    p.add_argument("--s-seq", type=_floats, default=[1e-2, 5e-3, 2.5e-3])
    return p


def _classical_opts():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--ell", type=float, default=1.0)
    p.add_argument("--s-min", type=float, default=0.1)
    p.add_argument("--s-max", type=float, default=5.0)
    p.add_argument("--s-count", type=int, default=50)
    p.add_argument("--ode-tol", type=float, default=1e-12)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="deformed-sine", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("det", parents=[common, _weight_opts()], help="one Fredholm determinant")
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--representation", default="interval", choices=["interval", "conjugated"])
    p.set_defaults(func=cmd_det)

    p = sub.add_parser("surface", parents=[common, _profile_opts()], help="tabulate sigma(y, s)")
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("fields", parents=[common, _weight_opts()], help="dump phi, psi on the lambda-grid")
    p.add_argument("--s", type=float, default=1.0)
    p.set_defaults(func=cmd_fields)

    p = sub.add_parser("scattering", parents=[common, _scattering_opts()], help="f -> W round trip")
    p.set_defaults(func=cmd_scattering)

    p = sub.add_parser("classical", parents=[common, _classical_opts()], help="Painleve V benchmark")
    p.set_defaults(func=cmd_classical)

    p = sub.add_parser("calibrate-constants", parents=[common, _profile_opts((-1.0, 1.0), (0.5, 2.0), 0.1, 0.05)],
                       help="fit the prefactors linking sigma-derived and U1-derived quantities")
    p.set_defaults(func=cmd_calibrate)

    verify = sub.add_parser("verify", help="run a verification and apply thresholds")
    vsub = verify.add_subparsers(dest="target", required=True)
    p = vsub.add_parser("zs", parents=[common, _weight_opts()])
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1e-3)
    p.set_defaults(func=cmd_verify_zs)
    p = vsub.add_parser("trace", parents=[common, _weight_opts()])
    p.add_argument("--s", type=float, default=1.0)
    p.set_defaults(func=cmd_verify_trace)
    p = vsub.add_parser("pde", parents=[common, _profile_opts()])
    p.set_defaults(func=cmd_verify_pde)
    p = vsub.add_parser("scattering", parents=[common, _scattering_opts()])
    p.set_defaults(func=cmd_verify_scattering)
    p = vsub.add_parser("classical", parents=[common, _classical_opts()])
    p.set_defaults(func=cmd_verify_classical)
    return parser


def _leaf_parsers(parser):
    out = []
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for child in action.choices.values():
                kids = _leaf_parsers(child)
                out.extend(kids if kids else [child])
    return out


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    cfg = load_config(known.config)
    thresholds = cfg.pop("thresholds", {})
    leaves = _leaf_parsers(parser)
    dests = set()
    for leaf in leaves:
        names = {a.dest for a in leaf._actions}
        dests |= names
        leaf.set_defaults(**{k: v for k, v in cfg.items() if k in names})
    unknown = sorted(set(cfg) - dests)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return thresholds


# ---------------------------------------------------------------- helpers

def _weight(args):
    return parse_weight(args.weight, args.alpha, args.epsilon, args.y, args.quad_tol)


def _profile(args):
    return ProfileSpec(args.profile, truncation_tol=args.quad_tol)


def _thresholds(args, key, cfg_thresholds):
    th = dict(DEFAULT_THRESHOLDS.get(key, {}))
    th.update(cfg_thresholds or {})
    th.update(dict(args.threshold))
    return th


def _formats(args):
    return ("csv", "json", "plotscript")


def _emit(args, stem, columns=None, data=None, plot=None):
    return emit_report(args.out_dir, stem, columns, data, _formats(args), plot,
                       render=not args.no_figures)


def _check(summary: dict, rules: dict) -> tuple[bool, list]:
    """rules: name -> (value, limit, kind) with kind 'max' (value <= limit) or 'min'."""
    failures = []
    for name, (value, limit, kind) in rules.items():
        ok = np.isfinite(value) and (value <= limit if kind == "max" else value >= limit)
        summary[name] = value
        if not ok:
            failures.append(f"{name}={value:.3e} ({'>' if kind == 'max' else '<'} {limit:.3e})")
    return not failures, failures


# ---------------------------------------------------------------- commands

def cmd_det(args, cfg_th):
    w = _weight(args)
    fn = interval_determinant if args.representation == "interval" else conjugated_determinant
    res = fn(w, args.s, args.order, args.panels, y=args.y)
    fine = fn(w, args.s, args.order, args.panels, refine=2, y=args.y)
    est = float(abs(complex(fine.log_det) - complex(res.log_det))) if not res.singular else float("nan")
    data = {"weight": w.label(), "s": args.s, "y": args.y, "representation": args.representation,
            "det": res.det, "log_det": res.log_det, "trace": res.trace, "est_error": est,
            "converged": bool(est < 1e-10), "singular": res.singular, "nodes": res.size}
    print(json.dumps(jsonable(data), indent=2, sort_keys=True))
    outs = _emit(args, "det", data=data)
    return True, outs, {"est_error": est}, {}


def cmd_surface(args, cfg_th):
    prof = _profile(args)
    yg = pde_lab.grid_range(*args.y_range, args.hy)
    sg = pde_lab.grid_range(*args.s_range, args.hs)
    surf = pde_lab.build_sigma_surface(prof, yg, sg, args.order, args.workers, resolvent=False)

    def refined(y):
        w = prof.weight(y)
        return [complex(interval_determinant(w, s, args.order, refine=2).log_det) for s in sg]
    fine = np.array(map_ordered(refined, list(yg), args.workers))
    est = np.abs(fine - surf.sigma)
    Y, S = np.meshgrid(yg, sg, indexing="ij")
    cols = {"y": Y.ravel(), "s": S.ravel(), "sigma": surf.sigma.ravel(), "Q": surf.Q.ravel(),
            "est_error": est.ravel()}
    outs = _emit(args, "surface", cols, {"profile": args.profile, "rows": int(Y.size),
                                         "max_est_error": float(np.nanmax(est))},
                 {"kind": "heatmap", "title": f"sigma for {args.profile}", "zs": ["sigma"]})
    return True, outs, {"max_est_error": float(np.nanmax(est))}, {}


def cmd_fields(args, cfg_th):
    w = _weight(args)
    f = zs.field_set(w, args.s, order=args.order)
    cols = {"lambda": f.lam, "phi": f.phi, "psi": f.psi}
    cols = {"lambda": f.lam, "phi_re": f.phi.real, "phi_im": f.phi.imag,
            "psi_re": f.psi.real, "psi_im": f.psi.imag}
    u1 = zs.compute_U1(f)
    data = {"weight": w.label(), "s": args.s, "U1": u1.U1, "p": u1.p, "q": u1.q,
            "beta": u1.beta, "gamma": u1.gamma, "alpha_rh": u1.alpha_rh,
            "convention": asdict(f.convention)}
    outs = _emit(args, "fields", cols, data,
                 {"kind": "line", "title": f"phi, psi at s={args.s}", "x": "lambda",
                  "ys": ["phi_re", "phi_im", "psi_re", "psi_im"]})
    return True, outs, {}, {}


def _scattering_run(args):
    datum = scattering.GaussianDatum(args.amp, args.center)
    yg = pde_lab.grid_range(*args.y_range, args.y_step)
    rc = scattering.roundtrip_check(datum, yg, args.s_seq, args.order)
    w0 = float(scattering.W_exact(datum, [0.0], args.order)[0])
    rows = rc["rows"]
    cols = {k: [r[k] for r in rows] for k in ("y", "f", "reconstructed", "abs_error")}
    return datum, rc, w0, cols


def cmd_scattering(args, cfg_th):
    datum, rc, w0, cols = _scattering_run(args)
    data = {"amp": args.amp, "center": args.center, "s_seq": args.s_seq,
            "sup_error": rc["sup_error"], "W0": w0}
    print(json.dumps(jsonable(data), indent=2, sort_keys=True))
    outs = _emit(args, "scattering", cols, data,
                 {"kind": "line", "title": "initial data round trip", "x": "y",
                  "ys": ["f", "reconstructed"]})
    return True, outs, {"sup_error": rc["sup_error"]}, {}


def _classical_run(args):
    sg = np.linspace(args.s_min, args.s_max, args.s_count)
    return classical_pv.compare_classical(args.ell, sg, args.ode_tol, args.order)


def _classical_cols(res):
    rows = res["rows"]
    return {k: [r[k] for r in rows] for k in ("s", "nu", "nu_prime", "sdslogF", "residual1",
                                               "residual2")}


def cmd_classical(args, cfg_th):
    res = _classical_run(args)
    summary = {k: res[k] for k in ("max_residual1", "max_residual2", "max_log_residual")}
    outs = _emit(args, "classical", _classical_cols(res),
                 dict(summary, ell=args.ell, branch_signs=res["solution"].branch_signs),
                 {"kind": "line", "title": f"sigma-form PV, ell={args.ell}", "x": "s",
                  "ys": ["nu", "sdslogF"]})
    return True, outs, summary, {}


def cmd_calibrate(args, cfg_th):
    th = _thresholds(args, "calibrate-constants", cfg_th)
    prof = _profile(args)
    surf = pde_lab.build_sigma_surface(prof, pde_lab.grid_range(*args.y_range, args.hy),
                                       pde_lab.grid_range(*args.s_range, args.hs), args.order,
                                       args.workers, resolvent=False)
    rep = pde_lab.calibrate_constants(surf, order=args.order, tol=th["distance"])
    print(json.dumps(jsonable({k: {"fit": v["fit"], "rational": v["rational"]}
                               for k, v in rep.items()}), indent=2, sort_keys=True))
    outs = _emit(args, "calibration", data=rep)
    summary = {}
    ok, fails = _check(summary, {f"{k}_distance": (v["distance"], th["distance"], "max")
                                 for k, v in rep.items()})
    return ok, outs, summary, th, fails


def cmd_verify_zs(args, cfg_th):
    th = _thresholds(args, "zs", cfg_th)
    w = _weight(args)
    r1 = zs.zs_residual(w, args.s, args.h, order=args.order, workers=args.workers)
    r2 = zs.zs_residual(w, args.s, args.h / 2, order=args.order, workers=args.workers)
    f = r1["fields"]
    order = float(np.log2(r1["phi"] / r2["phi"])) if r2["phi"] > 0 else float("nan")
    second = zs.second_log_derivative(f)["residual"]
    sym = float(np.abs(f.psi - f.phi[::-1]).max())
    detu = float(np.abs(np.linalg.det(f.Uplus) + 1).max())
    selfc = float(np.abs(np.einsum("kij,kj->ki", f.Yplus, f.f_vec) - f.F_vec).max())
    summary = {"zs_residual_h": r1["phi"], "zs_residual_h2": r2["phi"]}
    rules = {"second_log_derivative": (second, th["second_log_derivative"], "max"),
             "symmetry": (sym, th["symmetry"], "max"), "det_U": (detu, th["det_U"], "max"),
             "self_consistency": (selfc, th["self_consistency"], "max")}
    if w.is_zero:
        summary["zs_order"] = order
    else:
        rules["zs_order"] = (order, th["zs_order_min"], "min")
        rules["zs_order_upper"] = (order, th["zs_order_max"], "max")
    ok, fails = _check(summary, rules)
    outs = _emit(args, "verify_zs", data=dict(summary, weight=w.label(), s=args.s, h=args.h))
    return ok, outs, summary, th, fails


def cmd_verify_trace(args, cfg_th):
    th = _thresholds(args, "trace", cfg_th)
    w = _weight(args)
    f = zs.field_set(w, args.s, order=args.order)
    u1 = zs.compute_U1(f)
    rep = zs.verify_trace_identities(f, u1)
    summary = {"norm": rep["norm"], "gamma_even": rep["gamma_even"]}
    ok, fails = _check(summary, {k: (rep[k], th[k], "max") for k in ("orthogonality", "beta", "gamma")})
    outs = _emit(args, "verify_trace", data=dict(summary, weight=w.label(), s=args.s))
    return ok, outs, summary, th, fails


def cmd_verify_pde(args, cfg_th):
    th = _thresholds(args, "pde", cfg_th)
    prof = _profile(args)
    study = pde_lab.convergence_study(prof, tuple(args.y_range), tuple(args.s_range), args.hy,
                                      args.hs, args.order, args.workers)
    surf = study["coarse"]
    res = pde_lab.pde_residuals(surf)
    Y, S = np.meshgrid(surf.y_grid, surf.s_grid, indexing="ij")
    fl = res["fields"]
    coupled = np.fmax(np.abs(fl["coupled_p"]), np.abs(fl["coupled_q"]))
    q = surf.q_resolvent if surf.q_resolvent is not None else surf.q
    cols = {"y": Y.ravel(), "s": S.ravel(), "sigma": surf.sigma.ravel(),
            "p": (surf.p_resolvent if surf.p_resolvent is not None else surf.p).ravel(),
            "q": q.ravel(), "res_sigma_form": fl["sigma_form"].ravel(),
            "res_q_form": fl["q_form"].ravel(), "res_coupled": coupled.ravel()}
    summary = {f"max_{k}": v for k, v in study["max_coarse"].items()}
    summary.update({f"max_fine_{k}": v for k, v in study["max_fine"].items()})
    rules = {}
    for name, val in study["orders"].items():
        rules[f"order_{name}"] = (val, th["order_min"], "min")
        rules[f"order_{name}_upper"] = (val, th["order_max"], "max")
    if args.profile == "none":
        rules = {}
        summary.update({f"order_{k}": v for k, v in study["orders"].items()})
    ok, fails = _check(summary, rules)
    outs = _emit(args, "verify_pde", cols, dict(summary, profile=args.profile),
                 {"kind": "heatmap", "title": "PDE residuals", "log": True,
                  "zs": ["res_sigma_form", "res_q_form", "res_coupled"]})
    return ok, outs, summary, th, fails


def cmd_verify_scattering(args, cfg_th):
    th = _thresholds(args, "scattering", cfg_th)
    from scipy.special import gamma
    datum, rc, w0, cols = _scattering_run(args)
    rules = {"sup_error": (rc["sup_error"], th["sup_error"], "max")}
    summary = {}
    if args.center == 0.0:
        rules["W0"] = (abs(w0 + args.amp * gamma(0.75)), th["W0"], "max")
    ok, fails = _check(summary, rules)
    outs = _emit(args, "verify_scattering", cols, dict(summary, amp=args.amp, center=args.center),
                 {"kind": "line", "title": "initial data round trip", "x": "y",
                  "ys": ["f", "reconstructed"]})
    return ok, outs, summary, th, fails


def cmd_verify_classical(args, cfg_th):
    th = _thresholds(args, "classical", cfg_th)
    res = _classical_run(args)
    lim = max(th["residual1"], 10 * args.ode_tol)
    summary = {"max_residual2": res["max_residual2"]}
    ok, fails = _check(summary, {"max_residual1": (res["max_residual1"], lim, "max"),
                                 "max_log_residual": (res["max_log_residual"], th["log_residual"], "max")})
    outs = _emit(args, "verify_classical", _classical_cols(res), dict(summary, ell=args.ell),
                 {"kind": "line", "title": "residuals", "x": "s", "ys": ["residual1", "residual2"],
                  "yscale": "log"})
    return ok, outs, summary, th, fails


# ---------------------------------------------------------------- entry points

def run_command(argv=None) -> tuple[int, RunManifest | None]:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        cfg_th = _apply_config(parser, argv)
    except ConfigError as exc:
        print(f"deformed-sine: error: {exc}", file=sys.stderr)
        return 2, None
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), None
    t0 = time.perf_counter()
    try:
        out = args.func(args, cfg_th)
    except (ValueError, ConfigError) as exc:
        print(f"deformed-sine: error: {exc}", file=sys.stderr)
        return 2, None
    ok, outs, summary, th = out[:4]
    fails = out[4] if len(out) > 4 else []
    command = args.command if args.command != "verify" else f"verify {args.target}"
    params = {k: v for k, v in vars(args).items() if k not in ("func", "threshold")}
    manifest = RunManifest(command, jsonable(params), versions(), [str(p) for p in outs],
                           jsonable(summary), jsonable(th), ok, 0.0)
    manifest.wall_time = time.perf_counter() - t0
    path = Path(args.out_dir) / "manifest.json"
    manifest.outputs.append(str(path))
    write_manifest(path, manifest)
    for line in fails:
        print(f"FAIL {line}", file=sys.stderr)
    return (0 if ok else 1), manifest


def main(argv=None) -> int:
    code, _ = run_command(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
