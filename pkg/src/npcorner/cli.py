"""Command-line front end ``np-corner``.

Every command prints one JSON summary line.  Commands that write files
also write the fully resolved configuration next to their main artifact
(``<stem>.config.json``); ``np-corner --config <file>`` reruns it.
Exit status: 0 on success, 1 on configuration errors, 2 on numerical
failures.
"""
import argparse
from dataclasses import dataclass, field
from fractions import Fraction
import json
import math
import os
from pathlib import Path
import sys
import time

import numpy as np

from . import __version__
from .exceptions import ConfigError, DomainError, NPCornerError, SchemaError

DEFAULT_SEED = 42
SWEEP_HEADER = ("u", "eps", "re", "im")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------- argument helpers

def _complex(text):
    parts = [p.strip() for p in str(text).split(",")]
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected RE,IM but got {text!r}")


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}")


def _ints(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of integers, got {text!r}")


def _fraction(text):
    try:
        return Fraction(str(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected p/q, got {text!r}")


def _component(text):
    if len(str(text)) != 2 or any(c not in "12" for c in str(text)):
        raise argparse.ArgumentTypeError(f"component must be one of 11, 12, 21, 22, got {text!r}")
    return str(text)


def _num(x):
    """Shortest round-trip text of a float, with negative zero folded."""
    r = repr(float(x) + 0.0)
    return r[:-2] if r.endswith(".0") else r


def _cnum(z):
    return f"{_num(z.real)},{_num(z.imag)}"


def _pair(z):
    return [float(z.real) + 0.0, float(z.imag) + 0.0]


def _add_alpha(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--alpha", type=float, help="corner angle in radians")
    g.add_argument("--alpha-frac", type=_fraction, help="corner angle as a multiple p/q of pi")


def _alpha(args):
    if getattr(args, "alpha_frac", None) is not None:
        return float(Fraction(args.alpha_frac)) * math.pi
    return args.alpha


def _add_mesh(p, levels=10):
    p.add_argument("--curve", default="droplet", help="builtin name (droplet, square, disk) or config file")
    p.add_argument("--panels", type=int, default=8, help="panels per piece")
    p.add_argument("--levels", type=int, default=levels, help="dyadic grading levels toward corners")
    p.add_argument("--order", type=int, default=16, help="Gauss order per panel")


def _mesh(args, levels=None):
    from .geometry import build_mesh, load_curve

    spec = load_curve(args.curve)
    return build_mesh(spec, args.panels, args.levels if levels is None else levels, args.order)


# ---------------------------------------------------------------- config

@dataclass
class RunConfig:
    """Validated command configuration; ``args`` holds every option of the command."""

    command: str
    args: dict
    seed: int = DEFAULT_SEED
    version: str = field(default=__version__)

    def to_json(self):
        return json.dumps({"command": self.command, "seed": self.seed, "version": self.version,
                           "args": self.args}, indent=2, sort_keys=True) + "\n"


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, complex):
        return _cnum(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_num(x) if isinstance(x, float) else str(x) for x in v)
    return v


def _resolved(parser, argv):
    ns = parser.parse_args(argv)
    args = {k: _jsonable(v) for k, v in vars(ns).items() if k not in ("command", "config", "func", "seed")}
    return ns, RunConfig(ns.command, args, ns.seed)


def load_config(path, parser):
    """Read a resolved config file and return the equivalent argument list."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as err:
        raise ConfigError(f"cannot read config {path}: {err}")
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - {"command", "seed", "version", "args"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    command = data.get("command")
    sub = _SUBPARSERS.get(command)
    if sub is None:
        raise ConfigError(f"unknown command {command!r} in config")
    known = {a.dest: a for a in sub._actions if a.dest != "help"}
    argv = [command]
    for key, value in (data.get("args") or {}).items():
        if key not in known:
            raise ConfigError(f"unknown option {key!r} for command {command}")
        action = known[key]
        if value is None or value is False:
            continue
        flag = action.option_strings[0]
        if isinstance(action, argparse._StoreTrueAction):
            argv.append(flag)
        else:
            argv += [flag, str(value)]
    if "seed" in data:
        argv += ["--seed", str(int(data["seed"]))]
    return argv


def _config_path(artifact):
    p = Path(artifact)
    return p.with_name(p.stem + ".config.json")


def _write_config(cfg, artifact):
    if artifact:
        _config_path(artifact).write_text(cfg.to_json())


def _csv(path, header, rows):
    lines = [",".join(header)] + [",".join(r) for r in rows]
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_artifact(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    return payload


# ---------------------------------------------------------------- commands

def cmd_symbol(args, cfg):
    from .symbol import symbol_value

    v = complex(symbol_value(_alpha(args), args.z))
    print(_num(v.real) if v.imag == 0 else _cnum(v))
    return {"value": _pair(v)}


def cmd_mu(args, cfg):
    from .symbol import mu_inverse

    res = mu_inverse(_alpha(args), args.lam)
    print(_cnum(res.mu))
    return {"mu": _pair(res.mu), "residual": res.residual, "iterations": res.iterations}


def cmd_sigma(args, cfg):
    from .symbol import sigma_contour

    c = sigma_contour(_alpha(args), args.eta, args.samples, args.t_max)
    rows = [(_num(t), _num(v.real), _num(v.imag)) for t, v in zip(c.parameter_grid, c.samples)]
    _csv(args.out, ("t", "re", "im"), rows)
    _write_config(cfg, args.out)
    return {"samples": len(rows), "out": args.out}


def cmd_mesh(args, cfg):
    from .geometry import MESH_COLUMNS, mesh_table

    mesh = _mesh(args)
    tab = mesh_table(mesh)
    rows = [[str(int(r[0]))] + [_num(v) for v in r[1:]] for r in tab]
    _csv(args.dump, MESH_COLUMNS, rows)
    _write_config(cfg, args.dump)
    return {"n": mesh.n, "mesh_hash": mesh.hash(), "length": mesh.length(), "area": mesh.area(),
            "mesh_params": mesh.params(), "out": args.dump}


def cmd_assemble(args, cfg):
    from .operators import assemble_K, assemble_Kstar, assemble_S, dump_operator

    mesh = _mesh(args)
    build = {"K": assemble_K, "Kstar": assemble_Kstar, "S": assemble_S}[args.kind]
    op = build(mesh)
    if args.dump_op:
        dump_operator(op, args.dump_op)
        _write_config(cfg, args.dump_op)
    return {"kind": op.kind, "n": mesh.n, "mesh_hash": mesh.hash(), "mesh_params": mesh.params(),
            "out": args.dump_op}


def cmd_check(args, cfg):
    from .operators import (assemble_K, assemble_Kstar, assemble_S, gauss_identity_error,
                            plemelj_residual)

    if not (args.plemelj or args.gauss_identity):
        raise ConfigError("check needs --plemelj and/or --gauss-identity")
    levels = args.level_list or [args.levels]
    records = []
    for level in levels:
        mesh = _mesh(args, level)
        K = assemble_K(mesh)
        if args.gauss_identity:
            records.append({"metric": "gauss_identity", "value": gauss_identity_error(K),
                            "mesh_params": mesh.params()})
        if args.plemelj:
            S = assemble_S(mesh)
            records.append({"metric": "plemelj", "value": plemelj_residual(K, assemble_Kstar(mesh, K), S),
                            "mesh_params": mesh.params()})
    _json_artifact(args.out, {"records": records})
    _write_config(cfg, args.out)
    return {"records": records, "out": args.out}


def _rhs(args, grid):
    if args.rhs == "gaussian":
        return np.exp(-((grid.x - args.center) / args.width) ** 2)
    raise ConfigError(f"unknown right-hand side {args.rhs!r}")


def _model_grid(args):
    from .halfline import LogGrid

    return LogGrid(args.x_min, args.x_max, args.n)


def cmd_model(args, cfg):
    from .halfline import model_resolvent

    grid = _model_grid(args)
    sol = model_resolvent(_alpha(args), args.lam, _rhs(args, grid), grid, line=args.line)
    rows = [(_num(x), _num(s), _num(v.real), _num(v.imag)) for x, s, v in zip(grid.x, grid.s, sol)]
    _csv(args.dump, ("x", "s", "re", "im"), rows)
    _write_config(cfg, args.dump)
    return {"n": grid.n, "out": args.dump}


def cmd_model_fit(args, cfg):
    from .halfline import extract_singular_coefficient, fit_log_exponent, model_resolvent

    alpha = _alpha(args)
    grid = _model_grid(args)
    g = _rhs(args, grid)
    sol = model_resolvent(alpha, args.lam, g, grid)
    sc = extract_singular_coefficient(alpha, args.lam, g, grid, solution=sol)
    fit = fit_log_exponent(sol, grid, grid.x_min, grid.x_min + args.decades * math.log(10))
    payload = {"mu_fit": _pair(fit), "mu_symbol": _pair(sc.exponent),
               "c_lambda_re": sc.c_lambda.real, "c_lambda_im": sc.c_lambda.imag,
               "relerr": abs(fit - sc.exponent) / abs(sc.exponent),
               "regular_part_norm": sc.regular_part_norm}
    _json_artifact(args.out, payload)
    _write_config(cfg, args.out)
    return payload


_COMPONENT = {"11": (0, 0), "12": (0, 1), "21": (1, 0), "22": (1, 1)}


def _family(args):
    from .geometry import build_mesh, load_curve
    from .operators import assemble_K

    spec = load_curve(args.curve)
    meshes = [build_mesh(spec, args.panels, args.levels + i, args.order) for i in range(args.grading_extrapolation)]
    return meshes, [assemble_K(m) for m in meshes]


def _u_grid(args):
    if args.u is not None:
        return np.array(args.u, dtype=float)
    if args.n < 1:
        raise ConfigError("--n must be positive")
    return np.linspace(args.u_min, args.u_max, args.n)


def _sweep_summary(tab, index=()):
    raw, ext = tab.component(index)
    ok = tab.ok
    flagged = [_num(u) for u, f in zip(tab.grid, tab.flags) if f != "ok"]
    return {"n_u": int(tab.grid.size), "n_ok": int(ok.sum()), "flagged_u": len(flagged),
            "failed_cells": int(np.count_nonzero(~np.isfinite(raw))), "levels": tab.info.get("levels"),
            "essential_radius": tab.info.get("essential_radius")}


def cmd_polarizability(args, cfg):
    from .spectral import limit_polarizability_sweep, polarizability

    index = _COMPONENT[args.component]
    eps = args.eps
    meshes, Ks = _family(args)
    u = _u_grid(args)
    if eps == [0.0]:
        if len(meshes) > 1:
            raise ConfigError("--eps 0 evaluates on one mesh; drop --grading-extrapolation")
        vals = [polarizability(meshes[0], Ks[0], complex(x)).omega[index] for x in u]
        rows = [(_num(x), "0", _num(v.real), _num(v.imag)) for x, v in zip(u, vals)]
        if args.out:
            _csv(args.out, SWEEP_HEADER, rows)
            _write_config(cfg, args.out)
        else:
            for x, v in zip(u, vals):
                print(_cnum(v))
        return {"component": args.component, "values": [_pair(v) for v in vals],
                "mesh_hash": meshes[0].hash(), "out": args.out}
    tab = limit_polarizability_sweep(meshes[0], Ks[0], u, eps, refinements=list(zip(meshes[1:], Ks[1:])))
    if np.all(~np.isfinite(tab.raw)):
        raise _Numerical("every sweep cell is numerically singular")
    if args.out:
        tab.to_csv(args.out, index)
        _write_config(cfg, args.out)
    out = _sweep_summary(tab, index)
    out.update({"component": args.component, "mesh_hash": meshes[0].hash(), "out": args.out})
    return out


def _expr(text):
    import sympy

    x, y = sympy.symbols("x y", real=True)
    try:
        e = sympy.sympify(text, locals={"x": x, "y": y})
    except (sympy.SympifyError, TypeError) as err:
        raise ConfigError(f"cannot parse expression {text!r}: {err}")
    if not e.free_symbols <= {x, y}:
        raise ConfigError(f"expression {text!r} may only use x and y")
    fn = sympy.lambdify((x, y), e, "numpy")
    return lambda mesh: np.broadcast_to(np.asarray(fn(mesh.points.real, mesh.points.imag), dtype=complex),
                                        (mesh.n,)).copy()


def _project_constants(fn, meshes, Ks, Ss):
    """``f - int f rho0 dsigma``: the E' projection off the eigenvalue-1 eigenspace.

    It leaves the density on ``|u| < 1`` unchanged and removes the
    ``eps`` tail of the point mass at 1.
    """
    from .operators import assemble_Kstar, equilibrium_density

    rho0 = {id(m): equilibrium_density(assemble_Kstar(m, K), S).values for m, K, S in zip(meshes, Ks, Ss)}

    def projected(mesh):
        v = fn(mesh)
        return v - np.sum(v * rho0[id(mesh)] * mesh.dsigma)

    return projected


def cmd_density(args, cfg):
    from .operators import assemble_S
    from .spectral import spectral_density

    meshes, Ks = _family(args)
    Ss = [assemble_S(m) for m in meshes]
    g = _expr(args.g)
    h = _expr(args.h if args.h is not None else args.g)
    if not args.no_project:
        g, h = _project_constants(g, meshes, Ks, Ss), _project_constants(h, meshes, Ks, Ss)
    levels = list(zip(meshes, Ks, Ss))
    tab = spectral_density(*levels[0], g, h, _u_grid(args), args.eps, refinements=levels[1:])
    if args.out:
        tab.to_csv(args.out)
        _write_config(cfg, args.out)
    ok = tab.ok
    summary = _sweep_summary(tab)
    ext = tab.extrapolated
    summary.update({"mass_ok": float(np.trapezoid(np.where(ok, np.nan_to_num(ext), 0.0), tab.grid)),
                    "min_tau_ok": float(np.min(ext[ok])) if ok.any() else None,
                    "mesh_hash": meshes[0].hash(), "out": args.out})
    return summary


def cmd_eigs(args, cfg):
    from .geometry import build_mesh, load_curve
    from .operators import assemble_K
    from .spectral import detect_eigenvalues

    spec = load_curve(args.curve)
    levels = args.level_list or [8, 10, 12, 14]
    meshes = [build_mesh(spec, args.panels, L, args.order) for L in levels]
    rep = detect_eigenvalues(meshes, [assemble_K(m) for m in meshes], tol=args.tol)
    stable = rep.eigenvalues[rep.stable]
    payload = {"curve": spec.name, "levels": list(rep.levels),
               "essential_interval": [float(v) + 0.0 for v in rep.essential_interval],
               "stable": [float(v) for v in stable],
               "stability": [float(v) for v in rep.stability[rep.stable]],
               "isolated": [float(v) for v in rep.isolated],
               "embedded_candidates": [float(v) for v in rep.embedded_candidates],
               "pairing_defects": [[a, b] for a, b in rep.pairing_defects(tol=args.tol)],
               "n_eigenvalues": int(rep.eigenvalues.size)}
    _json_artifact(args.out, payload)
    _write_config(cfg, args.out)
    return {"curve": spec.name, "levels": payload["levels"], "n_stable": int(stable.size),
            "isolated": payload["isolated"], "n_embedded_candidates": len(payload["embedded_candidates"]),
            "max_pairing_defect": max((d for _, d in payload["pairing_defects"]), default=0.0),
            "out": args.out}


def cmd_exponent_fit(args, cfg):
    from .operators import assemble_K
    from .spectral import exponent_fit

    mesh = _mesh(args)
    K = assemble_K(mesh)
    fits = []
    for e in args.eps:
        f = exponent_fit(mesh, K, args.u_value, e, corner=args.corner, decades=args.decades)
        fits.append({"eps": e, "mu_fit": _pair(f.mu_fit), "mu_symbol": _pair(f.mu_oracle),
                     "relerr": f.relative_error, "residual": f.residual, "window": list(f.window),
                     "c_re": f.c.real, "c_im": f.c.imag})
    payload = {"curve": mesh.spec.name, "u": args.u_value, "corner": args.corner,
               "alpha": mesh.spec.corners[args.corner][1], "fits": fits, "mesh_hash": mesh.hash()}
    _json_artifact(args.out, payload)
    _write_config(cfg, args.out)
    return payload


def read_sweep_csv(path):
    """Return ``(raw, ext)`` row lists ``(u, eps, re, im)`` and ``(u, re, im)`` of a sweep CSV."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as err:
        raise SchemaError(f"cannot read {path}: {err}")
    if not lines or tuple(h.strip() for h in lines[0].split(",")) != SWEEP_HEADER:
        raise SchemaError(f"{path}: header must be {','.join(SWEEP_HEADER)}")
    raw, ext = [], []
    for k, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 4:
            raise SchemaError(f"{path}:{k}: expected 4 fields")
        try:
            u, re_, im_ = float(parts[0]), float(parts[2]), float(parts[3])
        except ValueError:
            raise SchemaError(f"{path}:{k}: non-numeric field")
        if parts[1].strip() == "inf":
            ext.append((u, re_, im_))
        else:
            try:
                raw.append((u, float(parts[1]), re_, im_))
            except ValueError:
                raise SchemaError(f"{path}:{k}: eps must be a number or 'inf'")
    return raw, ext


def plot_sweep(csv_path, svg_path, rho=None, title=None):
    """Two-panel SVG (Re and Im against u) of a sweep CSV; returns a list of warnings."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    raw, ext = read_sweep_csv(csv_path)
    warnings = []
    if not ext:
        warnings.append("no extrapolated rows; plotting raw rows only")
    matplotlib.rcParams["svg.hashsalt"] = "np-corner"
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    raw_a = np.array(raw).reshape(-1, 4)
    ext_a = np.array(ext).reshape(-1, 3)
    flagged = sorted(set(raw_a[:, 0]) - set(ext_a[:, 0])) if ext else []
    for ax, col, label in ((axes[0], 2, "Re"), (axes[1], 3, "Im")):
        for e in sorted(set(raw_a[:, 1]), reverse=True):
            sel = raw_a[:, 1] == e
            ax.plot(raw_a[sel, 0], raw_a[sel, col], lw=0.8, alpha=0.6, label=f"eps = {e:g}")
        if ext:
            ax.plot(ext_a[:, 0], ext_a[:, col - 1], "k.", ms=2.5, label="eps -> 0")
        if rho:
            ax.axvspan(-rho, rho, color="0.9", zorder=0)
        for u in flagged:
            ax.axvline(u, color="tab:red", lw=0.4, alpha=0.5)
        ax.set_ylabel(label)
    axes[1].set_xlabel("u")
    axes[0].legend(fontsize=7, loc="best")
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return warnings, len(flagged)


def cmd_plot(args, cfg):
    rho = args.rho
    if rho is None:
        side = _config_path(args.csv)
        if side.is_file():
            try:
                from .geometry import load_curve
                from .spectral import essential_radius

                curve = json.loads(side.read_text())["args"].get("curve")
                rho = essential_radius(load_curve(curve)) if curve else None
            except (NPCornerError, KeyError, ValueError, OSError):
                rho = None
    warnings, n_flag = plot_sweep(args.csv, args.svg, rho, args.title)
    cfg.args["rho"] = rho
    side = _config_path(args.svg)
    if side == _config_path(args.csv):
        # keep the sweep's own sidecar intact
        side = side.with_name(Path(args.svg).stem + ".plot.config.json")
    side.write_text(cfg.to_json())
    return {"svg": args.svg, "warnings": warnings, "flag_markers": n_flag, "essential_radius": rho}


class _Numerical(NPCornerError):
    pass


# ---------------------------------------------------------------- parser

_SUBPARSERS = {}


def build_parser():
    p = _Parser(prog="np-corner", description="Neumann-Poincare spectra of curves with corners.")
    p.add_argument("--config", help="rerun a resolved <stem>.config.json file")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for randomized parts")
        _SUBPARSERS[name] = sp
        return sp

    sp = add("symbol", cmd_symbol, "evaluate the Mellin symbol")
    _add_alpha(sp)
    sp.add_argument("--z", type=_complex, required=True, help="RE,IM")

    sp = add("mu", cmd_mu, "invert the symbol on the half-strip")
    _add_alpha(sp)
    sp.add_argument("--lambda", dest="lam", type=_complex, required=True, help="RE,IM")

    sp = add("sigma", cmd_sigma, "sample the symbol contour")
    _add_alpha(sp)
    sp.add_argument("--eta", type=float, default=1.0)
    sp.add_argument("--samples", type=int, default=2048)
    sp.add_argument("--t-max", type=float, default=30.0)
    sp.add_argument("--out", help="CSV file (t,re,im); stdout if omitted")

    sp = add("mesh", cmd_mesh, "build and dump a graded mesh")
    _add_mesh(sp)
    sp.add_argument("--dump", help="CSV file; stdout if omitted")

    sp = add("assemble", cmd_assemble, "assemble a layer operator")
    _add_mesh(sp)
    sp.add_argument("--kind", choices=("K", "Kstar", "S"), default="K")
    sp.add_argument("--dump-op", help="binary operator dump")

    sp = add("check", cmd_check, "operator identities")
    _add_mesh(sp)
    sp.add_argument("--plemelj", action="store_true")
    sp.add_argument("--gauss-identity", action="store_true")
    sp.add_argument("--level-list", type=_ints, help="comma separated grading levels")
    sp.add_argument("--out", help="JSON file")

    for name, func, help_ in (("model", cmd_model, "solve the half-line model resolvent"),
                              ("model-fit", cmd_model_fit, "fit the model corner exponent")):
        sp = add(name, func, help_)
        _add_alpha(sp)
        sp.add_argument("--lambda", dest="lam", type=_complex, required=True, help="RE,IM")
        sp.add_argument("--rhs", default="gaussian", choices=("gaussian",))
        sp.add_argument("--center", type=float, default=-2.0, help="centre of the gaussian in log s")
        sp.add_argument("--width", type=float, default=1.0)
        sp.add_argument("--x-min", type=float, default=-18.0)
        sp.add_argument("--x-max", type=float, default=6.0)
        sp.add_argument("--n", type=int, default=4096)
        if name == "model":
            sp.add_argument("--line", type=float, default=0.0, help="Mellin line Re z")
            sp.add_argument("--dump", help="CSV file (x,s,re,im); stdout if omitted")
        else:
            sp.add_argument("--decades", type=float, default=3.0)
            sp.add_argument("--out", help="JSON file")

    for name, func, help_ in (("polarizability", cmd_polarizability, "polarizability sweep"),
                              ("density", cmd_density, "spectral density sweep")):
        sp = add(name, func, help_)
        _add_mesh(sp)
        sp.add_argument("--grading-extrapolation", type=int, default=1,
                        help="number of consecutive grading levels (1 or >= 3)")
        sp.add_argument("--u", type=_floats, help="explicit comma separated u values")
        sp.add_argument("--u-min", type=float, default=-1.0)
        sp.add_argument("--u-max", type=float, default=1.0)
        sp.add_argument("--n", type=int, default=400)
        sp.add_argument("--eps", type=_floats, default=[0.08, 0.04, 0.02, 0.01])
        sp.add_argument("--out", help="CSV file (u,eps,re,im)")
        if name == "polarizability":
            sp.add_argument("--component", type=_component, default="11")
        else:
            sp.add_argument("--g", default="x", help="expression in x, y")
            sp.add_argument("--no-project", action="store_true",
                            help="keep the constant (eigenvalue 1) component of g and h")
            sp.add_argument("--h", help="expression in x, y (defaults to g)")

    sp = add("eigs", cmd_eigs, "stable discrete eigenvalues")
    _add_mesh(sp)
    sp.add_argument("--level-list", type=_ints, help="grading levels (default 8,10,12,14)")
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--out", help="JSON file")

    sp = add("exponent-fit", cmd_exponent_fit, "corner exponent of the limiting-absorption solution")
    _add_mesh(sp)
    sp.add_argument("--u", dest="u_value", type=float, required=True)
    sp.add_argument("--eps", type=_floats, default=[0.08, 0.04, 0.02, 0.01])
    sp.add_argument("--corner", type=int, default=0)
    sp.add_argument("--decades", type=float, default=2.5)
    sp.add_argument("--out", help="JSON file")

    sp = add("plot", cmd_plot, "render a sweep CSV to SVG")
    sp.add_argument("--csv", required=True)
    sp.add_argument("--svg", required=True)
    sp.add_argument("--rho", type=float, help="half-width of the shaded essential interval")
    sp.add_argument("--title")
    return p


def _threads():
    text = os.environ.get("NP_CORNER_THREADS")
    if not text:
        return None
    try:
        n = int(text)
    except ValueError:
        raise ConfigError(f"NP_CORNER_THREADS must be an integer, got {text!r}")
    if n < 1:
        raise ConfigError("NP_CORNER_THREADS must be positive")
    return n


def run(argv=None):
    """Parse, execute and report; returns the exit status."""
    from threadpoolctl import threadpool_limits

    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    t0 = time.perf_counter()
    try:
        pre = parser.parse_known_args(argv)[0] if "--config" in argv else None
        if pre is not None and pre.config:
            argv = load_config(pre.config, parser)
        ns, cfg = _resolved(parser, argv)
        if ns.command is None:
            raise ConfigError("missing command; see np-corner --help")
        n_threads = _threads()
        with threadpool_limits(limits=n_threads):
            summary = ns.func(ns, cfg)
    except (ConfigError, SchemaError, DomainError) as err:
        print(json.dumps({"status": "error", "kind": type(err).__name__, "message": str(err)}))
        return 1
    except NPCornerError as err:
        print(json.dumps({"status": "failed", "kind": type(err).__name__, "message": str(err)}))
        return 2
    summary = {"status": "ok", "command": ns.command, **summary,
               "elapsed_s": round(time.perf_counter() - t0, 3)}
    stream = sys.stderr if _stdout_artifact(ns) else sys.stdout
    print(json.dumps(summary, sort_keys=True, default=_jsonable), file=stream)
    return 0


def _stdout_artifact(ns):
    if ns.command in ("sigma",) and not ns.out:
        return True
    if ns.command == "mesh" and not ns.dump:
        return True
    if ns.command == "model" and not ns.dump:
        return True
    return False


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
