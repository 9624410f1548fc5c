"""Command-line front end.

Every subcommand reads its parameters from flags, from a TOML file given
with ``--config`` or both (flags win). Keys in the file are the option names
with dashes or underscores, either at top level or in a table named after
the subcommand. Unknown keys are rejected before any computation.

Outputs are CSV or JSON. Each file starts with the package version and a
SHA-256 of the resolved configuration, and identical configurations give
identical bytes.

Exit codes: 0 success, 2 configuration or domain error, 3 numerical
non-convergence, 4 model infeasibility.
"""

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from .analysis import compressibility_scaling, maxwell_jump_scaling, volume_jump_scaling
from .coexistence import (
    CoexistenceCurve,
    clapeyron_speed,
    coexistence_curve,
    maxwell_pressure,
    volume_entropy,
)
from .eos_core import (
    HYDROGEN,
    REDUCED_VDW,
    critical_point,
    eos_from_dict,
    eos_to_dict,
    isotherm_pressure,
    local_cubic_coeffs,
    reduce_eos,
    solve_volumes,
    vdw_spec,
)
from .eos_fit import fit_alpha_f, fitted_critical_point, predict_isotherm, read_isotherm_csv
from .errors import ConfigError, PhaseShockError, TieError, WindowWarning
from .pearcey_universal import cubic_limit, pearcey_moments, scaling_map
from .shock_dynamics import (
    PhaseDiagram,
    constant_state,
    detect_confluence,
    eos_states,
    propagate_shock,
)
from .viscous_solver import characteristic_solution, evolve_viscous, vdw_entropy_spec

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

BUILTIN_EOS = {"vdw-hydrogen": HYDROGEN, "vdw-reduced": REDUCED_VDW}


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _flag(v):
    if isinstance(v, bool):
        return v
    raise ValueError(f"expected true or false, got {v!r}")


# name -> (converter, default, help); ``None`` default means "not set".
COMMON = {
    "eos": (str, "vdw-reduced", "built-in EOS (vdw-hydrogen, vdw-reduced) or path to an EOS JSON document"),
    "reduced": (_flag, False, "work in reduced variables V/V_c, P/P_c, T/T_c"),
    "out": (str, None, "output file (default: standard output)"),
}

COMMANDS = {
    "isotherm": ("raw and Maxwell-corrected isotherms", {
        "T": (_floats, None, "comma-separated temperatures"),
        "V-min": (float, None, "smallest volume (default 0.45 V_c)"),
        "V-max": (float, None, "largest volume (default 5 V_c)"),
        "points": (int, 400, "samples per isotherm"),
    }),
    "critical-point": ("critical point and local cubic coefficients", {}),
    "maxwell": ("equal-areas saturation states", {
        "T": (_floats, None, "comma-separated temperatures"),
    }),
    "coexistence": ("coexistence curve", {
        "T-lo": (float, None, "lowest temperature"),
        "T-hi": (float, None, "highest temperature"),
        "steps": (int, 50, "number of temperatures"),
    }),
    "clapeyron": ("Rankine-Hugoniot speed against dP_sat/dT", {
        "T-lo": (float, None, "lowest temperature"),
        "T-hi": (float, None, "highest temperature"),
        "steps": (int, 25, "number of temperatures"),
        "h": (float, 1e-4, "relative finite-difference step in T"),
    }),
    "pearcey": ("Pearcey function and universal profile on a grid", {
        "X-min": (float, -10.0, ""), "X-max": (float, 10.0, ""), "nx": (int, 21, ""),
        "Y-min": (float, -10.0, ""), "Y-max": (float, 10.0, ""), "ny": (int, 21, ""),
        "inviscid": (_flag, False, "add the cubic (inviscid) limit; ties on the shock line give 0 and tie=1"),
    }),
    "universal": ("universal near-critical volume on a (P, T) grid", {
        "gamma0": (float, None, "viscous coefficient gamma at V_c"),
        "nu": (float, 1e-6, "viscosity parameter"),
        "X-min": (float, -10.0, ""), "X-max": (float, 10.0, ""), "nx": (int, 21, ""),
        "Y-min": (float, -10.0, ""), "Y-max": (float, 10.0, ""), "ny": (int, 21, ""),
    }),
    "exponents": ("critical exponents from log-log fits", {
        "gamma0": (float, None, "viscous coefficient gamma at V_c"),
        "nu-min": (float, 1e-6, ""), "nu-max": (float, 1e-3, ""),
        "points": (int, 13, "number of nu values (log spaced)"),
        "delta-p": (float, 1.0, "pressure domain size (prefactor only)"),
        "maxwell-dT": (_floats, None, "optional T_c - T values for the equal-areas jump exponent"),
    }),
    "pde": ("viscous conservation law on a temperature grid", {
        "S1": (float, 0.0, "constant S1"), "S2": (float, 0.0, "constant S2"),
        "c-v": (float, 1.5, "heat capacity factor in F(T)"),
        "nu": (float, 1e-3, "viscosity parameter"),
        "form": (str, "printed", "gamma coefficient: printed or derived"),
        "T-min": (float, None, ""), "T-max": (float, None, ""),
        "N": (int, 512, "grid points"),
        "P0": (float, None, "initial pressure"), "P1": (float, None, "final pressure"),
        "P-out": (_floats, None, "snapshot pressures (default: P0, P1)"),
        "cfl": (float, 0.4, ""),
        "frame-speed": (float, 0.0, "speed of the moving temperature frame"),
        "binary": (str, None, "also write <stem>.bin and <stem>.json"),
    }),
    "shocks": ("liquid-gas boundary integrated as a shock", {
        "T0": (float, None, "start temperature"),
        "T-end": (float, None, "end temperature"),
        "step": (float, 0.01, "temperature step"),
    }),
    "fit": ("alpha and f from two isotherm CSV files", {
        "iso1": (str, None, "first isotherm (columns V,P; header '# T=<value>')"),
        "iso2": (str, None, "second isotherm"),
        "smooth": (_flag, False, "smoothing splines with cross-validated penalty before the solve"),
        "predict-T": (_floats, None, "temperatures of predicted isotherms"),
        "predict-out": (str, None, "CSV for predicted isotherms (T,V,P)"),
    }),
    "phase-diagram": ("vapour and fusion branches and their triple point", {
        "T0": (float, None, "start temperature of the vapour branch"),
        "T-end": (float, None, "end temperature of both branches"),
        "step": (float, 0.005, "temperature step"),
        "solid-V": (float, None, "solid volume"), "solid-S": (float, None, "solid entropy"),
        "fusion-T0": (float, None, "start temperature of the fusion branch"),
        "fusion-P0": (float, None, "start pressure of the fusion branch"),
        "csv-stem": (str, None, "also write one CSV per curve with this stem"),
    }),
}


def _key(name):
    return name.replace("-", "_")


def build_parser():
    p = argparse.ArgumentParser(prog="phaseshock", description="Phase transitions as nonlinear waves: EOS, coexistence, "
                                "universal critical profiles, viscous PDE and shock confluence.")
    p.add_argument("--version", action="version", version=f"phaseshock {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (help_text, opts) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--config", default=None, help="TOML file with parameters (flags win)")
        for oname, (conv, default, h) in {**COMMON, **opts}.items():
            dflt = f" (default {default})" if default not in (None, False) else ""
            if conv is _flag:
                sp.add_argument(f"--{oname}", dest=_key(oname), action="store_const", const=True, default=None,
                                help=h + dflt)
            else:
                sp.add_argument(f"--{oname}", dest=_key(oname), default=None, help=h + dflt)
    return p


def resolve(command, args):
    """Merge defaults, the config file and flags; convert and validate every value."""
    opts = {**COMMON, **COMMANDS[command][1]}
    table = {_key(k): v for k, v in opts.items()}
    cfg = {k: d for k, (_, d, _) in table.items()}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                doc = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {args.config!r}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {args.config!r} is not valid TOML: {exc}") from exc
        section = doc.pop(command, {})
        for other in COMMANDS:
            doc.pop(other, None)
        for src in (doc, section):
            for k, v in src.items():
                kk = _key(k)
                if kk not in table:
                    raise ConfigError(f"unknown config key {k!r} for command {command!r}")
                cfg[kk] = _convert(table[kk][0], v, k)
    for kk in table:
        v = getattr(args, kk, None)
        if v is not None:
            cfg[kk] = _convert(table[kk][0], v, kk)
    return cfg


def _convert(conv, value, name):
    try:
        return conv(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {name!r}: {value!r} ({exc})") from exc


def _require(cfg, *names):
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        raise ConfigError(f"missing required parameter(s): {', '.join(m.replace('_', '-') for m in missing)}")


def _positive(cfg, *names):
    for n in names:
        v = cfg.get(n)
        vals = v if isinstance(v, list) else [v]
        for x in vals:
            if x is not None and not (np.isfinite(x) and x > 0):
                raise ConfigError(f"{n.replace('_', '-')} must be positive, got {x!r}")


def load_eos(cfg):
    src = cfg["eos"]
    if src in BUILTIN_EOS:
        eos = vdw_spec(BUILTIN_EOS[src])
    else:
        try:
            with open(src) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"eos: {src!r} is neither a built-in name ({', '.join(BUILTIN_EOS)}) nor a readable file") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"eos: {src!r} is not valid JSON: {exc}") from exc
        doc = doc.get("eos", doc)
        try:
            eos = eos_from_dict(doc)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"eos: malformed EOS document {src!r}: {exc}") from exc
    return reduce_eos(eos) if cfg["reduced"] else eos


def config_hash(cfg):
    doc = dict(cfg)
    doc.pop("out", None)
    if doc.get("eos") not in BUILTIN_EOS and doc.get("eos") and os.path.exists(doc["eos"]):
        with open(doc["eos"], "rb") as fh:
            doc["eos_sha256"] = hashlib.sha256(fh.read()).hexdigest()
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def header_lines(command, cfg):
    return [f"phaseshock {__version__}", f"command {command}", f"config_sha256 {config_hash(cfg)}"]


class Output:
    """Text sink for one output file (or stdout); written in one piece at the end."""

    def __init__(self, path, command, cfg):
        self.path = path
        self.header = header_lines(command, cfg)

    def csv(self, columns, rows):
        buf = io.StringIO()
        for line in self.header:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
        self._emit(buf.getvalue())

    def json(self, doc):
        text = json.dumps({"header": self.header, **doc}, indent=1, sort_keys=True) + "\n"
        self._emit(text)

    def _emit(self, text):
        if self.path is None:
            sys.stdout.write(text)
        else:
            with open(self.path, "w", newline="") as fh:
                fh.write(text)


# Subcommands -----------------------------------------------------------------

def cmd_isotherm(cfg, out):
    _require(cfg, "T")
    _positive(cfg, "T", "points")
    eos = load_eos(cfg)
    cp = critical_point(eos)
    lo = cfg["V_min"] if cfg["V_min"] is not None else max(0.45 * cp.V_c, eos.V_domain[0] * (1 + 1e-6))
    hi = cfg["V_max"] if cfg["V_max"] is not None else 5.0 * cp.V_c
    if not lo < hi:
        raise ConfigError(f"V-min ({lo!r}) must be below V-max ({hi!r})")
    V = np.linspace(lo, hi, cfg["points"])
    rows = []
    for T in cfg["T"]:
        P = isotherm_pressure(V, T, eos)
        Pm = P.copy()
        if T < cp.T_c * (1 - 1e-6):
            sp = maxwell_pressure(T, eos, cp=cp)
            inside = (V >= sp.V_l) & (V <= sp.V_g)
            Pm[inside] = sp.P_sat
        rows += [(T, v, p, pm) for v, p, pm in zip(V, P, Pm)]
    out.csv(["T", "V", "P", "P_maxwell"], rows)


def cmd_critical_point(cfg, out):
    eos = load_eos(cfg)
    cp = critical_point(eos)
    c1, c3 = local_cubic_coeffs(eos, cp)
    out.json({"V_c": cp.V_c, "P_c": cp.P_c, "T_c": cp.T_c, "alpha_c": float(eos.alpha(cp.V_c)), "c1": c1, "c3": c3})


def _saturation_rows(points):
    return [(p.T, p.P_sat, p.V_l, p.V_g, p.delta_S, p.L_h) for p in points]


SAT_COLUMNS = ["T", "P_sat", "V_l", "V_g", "delta_S", "latent_heat"]


def cmd_maxwell(cfg, out):
    _require(cfg, "T")
    _positive(cfg, "T")
    eos = load_eos(cfg)
    cp = critical_point(eos)
    pts = CoexistenceCurve(tuple(maxwell_pressure(T, eos, cp=cp) for T in cfg["T"]))
    out.csv(SAT_COLUMNS, _saturation_rows(pts.points))


def cmd_coexistence(cfg, out):
    _require(cfg, "T_lo", "T_hi")
    _positive(cfg, "T_lo", "T_hi", "steps")
    eos = load_eos(cfg)
    curve = coexistence_curve(cfg["T_lo"], cfg["T_hi"], cfg["steps"], eos)
    out.csv(SAT_COLUMNS, _saturation_rows(curve.points))


def cmd_clapeyron(cfg, out):
    _require(cfg, "T_lo", "T_hi")
    _positive(cfg, "T_lo", "T_hi", "steps", "h")
    eos = load_eos(cfg)
    cp = critical_point(eos)
    s = volume_entropy(eos)
    rows = []
    for T in np.linspace(cfg["T_lo"], cfg["T_hi"], cfg["steps"]):
        sp = maxwell_pressure(T, eos, cp=cp)
        dT = cfg["h"] * T
        fd = (maxwell_pressure(T + dT, eos, cp=cp, seed=sp.P_sat).P_sat
              - maxwell_pressure(T - dT, eos, cp=cp, seed=sp.P_sat).P_sat) / (2 * dT)
        U = clapeyron_speed(sp, s)
        rows.append((float(T), sp.P_sat, U, fd, abs(U - fd) / abs(fd), sp.L_h / (T * sp.delta_V)))
    out.csv(["T", "P_sat", "rh_speed", "dPsat_dT", "rel_diff", "clapeyron"], rows)


def _grid(cfg):
    for n in ("nx", "ny"):
        if cfg[n] < 1:
            raise ConfigError(f"{n} must be at least 1")
    xs = np.linspace(cfg["X_min"], cfg["X_max"], cfg["nx"])
    ys = np.linspace(cfg["Y_min"], cfg["Y_max"], cfg["ny"])
    return xs, ys


def cmd_pearcey(cfg, out):
    xs, ys = _grid(cfg)
    cols = ["X", "Y", "log_Lambda", "Lambda", "u"]
    if cfg["inviscid"]:
        cols += ["u_cubic", "tie"]
    rows = []
    for y in ys:
        for x in xs:
            v = pearcey_moments(float(x), float(y))
            row = [float(x), float(y), v.log_Lambda, v.Lambda, v.u]
            if cfg["inviscid"]:
                try:
                    row += [float(cubic_limit(float(x), float(y))), 0]
                except TieError:
                    row += [0.0, 1]
            rows.append(row)
    out.csv(cols, rows)


def cmd_universal(cfg, out):
    _require(cfg, "gamma0")
    _positive(cfg, "nu")
    eos = load_eos(cfg)
    smap = scaling_map(eos, cfg["gamma0"], cfg["nu"])
    xs, ys = _grid(cfg)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("error", WindowWarning)
        for y in ys:
            for x in xs:
                P, T = (float(a) for a in smap.from_XY(x, y))
                u = pearcey_moments(float(x), float(y)).u
                roots = solve_volumes(P, T, eos)
                rows.append((float(x), float(y), P, T, smap.cp.V_c + smap.sigma * smap.lam * u,
                             float(roots[0]) if len(roots) == 1 else float("nan")))
    out.csv(["X", "Y", "P", "T", "V_universal", "V_inviscid"], rows)


def cmd_exponents(cfg, out):
    _require(cfg, "gamma0")
    _positive(cfg, "nu_min", "nu_max", "points", "delta_p")
    eos = load_eos(cfg)
    smap = scaling_map(eos, cfg["gamma0"], cfg["nu_min"])
    nus = np.geomspace(cfg["nu_min"], cfg["nu_max"], cfg["points"])
    ests = [compressibility_scaling(smap, nus), volume_jump_scaling(smap, nus, cfg["delta_p"])]
    if cfg["maxwell_dT"]:
        _positive(cfg, "maxwell_dT")
        m = maxwell_jump_scaling(eos, cfg["maxwell_dT"], cp=smap.cp)
        ests.append(m)
    doc = {"estimates": [e.to_dict() for e in ests], "sigma": smap.sigma, "alpha0": smap.alpha0,
           "alpha1": smap.alpha1}
    out.json(doc)
    if out.path is not None:
        stem = os.path.splitext(out.path)[0]
        labels = ["K_T", "volume_jump", "maxwell_jump"]
        for e, q in zip(ests, labels):
            e.to_csv(f"{stem}_{q}.csv", q, header=out.header)


def cmd_pde(cfg, out):
    _require(cfg, "T_min", "T_max", "P0", "P1")
    _positive(cfg, "nu", "N", "cfl")
    if cfg["form"] not in ("printed", "derived"):
        raise ConfigError(f"form must be 'printed' or 'derived', got {cfg['form']!r}")
    if cfg["eos"] not in BUILTIN_EOS:
        raise ConfigError("pde needs a built-in van der Waals EOS (entropy S0 = nR log(V - nb))")
    params = REDUCED_VDW if cfg["reduced"] else BUILTIN_EOS[cfg["eos"]]
    eos = vdw_spec(params)
    spec = vdw_entropy_spec(params, cfg["nu"], S1=cfg["S1"], S2=cfg["S2"], c_v=cfg["c_v"])
    T = np.linspace(cfg["T_min"], cfg["T_max"], cfg["N"])
    P_out = cfg["P_out"] or [cfg["P0"], cfg["P1"]]
    sol = evolve_viscous(spec, eos, T, cfg["P0"], cfg["P1"], form=cfg["form"], cfl=cfg["cfl"],
                         frame_speed=cfg["frame_speed"], P_out=P_out)
    Ts = sol.T
    rows = []
    for k, P in enumerate(sol.P):
        try:
            Vc = characteristic_solution(P, Ts[k], eos)
        except PhaseShockError:
            Vc = np.full_like(Ts[k], np.nan)
        rows += [(float(P), t, v, vc) for t, v, vc in zip(Ts[k], sol.V[k], Vc)]
    out.csv(["P", "T", "V", "V_characteristic"], rows)
    if cfg["binary"]:
        sol.meta["config_sha256"] = config_hash(cfg)
        sol.to_binary(cfg["binary"])


def cmd_shocks(cfg, out):
    _require(cfg, "T0", "T_end")
    _positive(cfg, "T0", "T_end", "step")
    eos = load_eos(cfg)
    cp = critical_point(eos)
    liquid, gas = eos_states(eos)
    P0 = maxwell_pressure(cfg["T0"], eos, cp=cp).P_sat
    traj = propagate_shock(cfg["T0"], P0, liquid, gas, cfg["T_end"], cfg["step"], name="liquid-gas")
    rows = []
    seed = None
    for T, P, U in zip(traj.T, traj.P, traj.U):
        sp = maxwell_pressure(T, eos, cp=cp, seed=seed)
        seed = sp.P_sat
        rows.append((float(T), float(P), float(U), sp.P_sat, abs(P - sp.P_sat) / sp.P_sat))
    out.csv(["T", "P", "U", "P_sat_maxwell", "rel_diff"], rows)


def cmd_fit(cfg, out):
    _require(cfg, "iso1", "iso2")
    d1, d2 = read_isotherm_csv(cfg["iso1"]), read_isotherm_csv(cfg["iso2"])
    eos = fit_alpha_f(d1, d2, smooth=cfg["smooth"])
    doc = {"eos": eos_to_dict(eos)}
    # Exact conditions first; noisy fits fall back to the first-derivative estimate.
    for method, finder in (("conditions", critical_point), ("monotonicity-bound", fitted_critical_point)):
        try:
            cp = finder(eos)
        except PhaseShockError as exc:
            doc["critical_point"] = None
            doc["critical_point_error"] = str(exc)
            continue
        doc["critical_point"] = {"V_c": cp.V_c, "P_c": cp.P_c, "T_c": cp.T_c, "method": method}
        doc.pop("critical_point_error", None)
        break
    out.json(doc)
    if cfg["predict_T"]:
        _positive(cfg, "predict_T")
        if cfg["predict_out"] is None:
            raise ConfigError("predict-T needs predict-out")
        rows = []
        for T in cfg["predict_T"]:
            V, P = predict_isotherm(eos, T)
            rows += [(T, v, p) for v, p in zip(V, P)]
        Output(cfg["predict_out"], "fit", cfg).csv(["T", "V", "P"], rows)


def cmd_phase_diagram(cfg, out):
    _require(cfg, "T0", "T_end", "solid_V", "solid_S", "fusion_T0", "fusion_P0")
    _positive(cfg, "T0", "T_end", "step", "solid_V", "fusion_T0")
    eos = load_eos(cfg)
    cp = critical_point(eos)
    liquid, gas = eos_states(eos)
    solid = constant_state("solid", cfg["solid_V"], cfg["solid_S"])
    P0 = maxwell_pressure(cfg["T0"], eos, cp=cp).P_sat
    vapour = propagate_shock(cfg["T0"], P0, liquid, gas, cfg["T_end"], cfg["step"], name="liquid-gas")
    fusion = propagate_shock(cfg["fusion_T0"], cfg["fusion_P0"], solid, liquid, cfg["T_end"], cfg["step"],
                             name="solid-liquid")
    curves = [vapour, fusion]
    events = []
    try:
        ev = detect_confluence(fusion, vapour, T_end=cfg["T_end"], step=cfg["step"])
        events.append(ev)
        curves.append(ev.outgoing)
    except PhaseShockError as exc:
        if exc.exit_code != 4:
            raise
    diagram = PhaseDiagram(curves, events)
    doc = diagram.to_dict()
    out.json(doc)
    if cfg["csv_stem"]:
        diagram.write(os.devnull, cfg["csv_stem"], header=out.header)


HANDLERS = {
    "isotherm": cmd_isotherm,
    "critical-point": cmd_critical_point,
    "maxwell": cmd_maxwell,
    "coexistence": cmd_coexistence,
    "clapeyron": cmd_clapeyron,
    "pearcey": cmd_pearcey,
    "universal": cmd_universal,
    "exponents": cmd_exponents,
    "pde": cmd_pde,
    "shocks": cmd_shocks,
    "fit": cmd_fit,
    "phase-diagram": cmd_phase_diagram,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args.command, args)
        out = Output(cfg["out"], args.command, cfg)
        HANDLERS[args.command](cfg, out)
    except PhaseShockError as exc:
        print(f"phaseshock {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except WindowWarning as exc:
        print(f"phaseshock {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"phaseshock {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
