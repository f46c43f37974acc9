"""Command-line interface: ``imexap {run,converge,stability,tableaus}``.

Settings are resolved in increasing priority: built-in defaults, the
chosen preset, the ``[imexap]`` section of ``--config`` and finally
command-line flags.  Exit status is 0 on success, 1 on usage errors and 2
on numerical failures.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import sys
import warnings

import numpy as np

from . import reference, scenarios, stability, stepper, tableaux

log = logging.getLogger("imexap")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    items = [t for t in str(text).replace(" ", "").split(",") if t]
    try:
        return [float(t) for t in items]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _range(text: str) -> tuple[float, float]:
    vals = _float_list(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    return vals[0], vals[1]


# config keys that map to RunConfig fields, with their converters
_RUN_FIELDS = {f.name: f.type for f in dataclasses.fields(scenarios.RunConfig)}
_CONVERTERS = {
    "gamma": float, "epsilon": float, "alpha": float, "nx": int, "x_lo": float, "x_hi": float,
    "cfl": float, "t_final": float, "weno_eps": float,
    "strict_cfl": lambda s: str(s).strip().lower() in ("1", "true", "yes", "on"),
}


def _add_globals(p: argparse.ArgumentParser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=default, help="key-value config file ([imexap] section)")
    p.add_argument("--output", "-o", default=default, help="output CSV path (default: stdout)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1,
                   help="worker processes for independent runs")
    p.add_argument("--strict-cfl", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="abort when dt*Theta/dx exceeds 1")
    p.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS if suppress else False)


def _add_run_options(p: argparse.ArgumentParser):
    g = p.add_argument_group("simulation")
    g.add_argument("--preset", choices=sorted(scenarios.PRESETS), default=None)
    g.add_argument("--model", choices=["linear", "heat", "porous", "ruijgrook-wu"])
    g.add_argument("--gamma", type=float)
    g.add_argument("--epsilon", help="epsilon (comma list allowed for converge)")
    g.add_argument("--alpha", type=float)
    g.add_argument("--profile", choices=sorted(scenarios.ALPHA_PROFILES), help="alpha(x) profile")
    g.add_argument("--scheme", help="tableau name or file (comma list allowed for converge)")
    g.add_argument("--formulation", choices=["ap-explicit", "ap-implicit", "first-order"])
    g.add_argument("--nx", type=int)
    g.add_argument("--domain", type=_range, help="LO,HI")
    g.add_argument("--bc", choices=["periodic", "zero-flux", "reflecting"])
    g.add_argument("--cfl", type=float, help="CFL number lambda")
    g.add_argument("--t-final", type=float)
    g.add_argument("--dt-mode", choices=["standard", "hyperbolic"])
    g.add_argument("--initial", choices=sorted(scenarios.INITIAL_DATA))
    g.add_argument("--v0", choices=["well-prepared", "zero", "literal"])
    g.add_argument("--literal-initial-data", action="store_true", default=None,
                   help="use the printed v(x,0) = sin - cos instead of the closure (sine data only)")
    g.add_argument("--diffusion-stencil", choices=["auto", "fd6", "double_rusanov"])
    g.add_argument("--weno-eps", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="imexap", description=__doc__.splitlines()[0])
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("run", help="integrate one configuration and write x,u,v")
    _add_globals(p, suppress=True)
    _add_run_options(p)

    p = sub.add_parser("converge", help="self-convergence study")
    _add_globals(p, suppress=True)
    _add_run_options(p)
    p.add_argument("--levels", type=int, default=4, help="number of grids (>= 3)")
    p.add_argument("--base-nx", type=int, default=None, help="coarsest grid (default: config nx)")

    p = sub.add_parser("stability", help="root-condition scan of IMEX-BDF schemes")
    _add_globals(p, suppress=True)
    p.add_argument("--scheme", default="bdf2")
    p.add_argument("--formulation", choices=["ap-explicit", "ap-implicit"], default="ap-explicit")
    p.add_argument("--eps-alpha", type=_float_list, required=True, help="comma list of eps**alpha")
    p.add_argument("--zr-range", type=_range, default=(1e-2, 1e3))
    p.add_argument("--zi-range", type=_range, default=(0.0, 3.0))
    p.add_argument("--resolution", type=int, nargs=2, default=(40, 40), metavar=("NZR", "NZI"))
    p.add_argument("--assert-stable", action="store_true",
                   help="exit 2 unless every grid point is stable")

    p = sub.add_parser("tableaus", help="list tableaus and order-condition residuals")
    _add_globals(p, suppress=True)
    p.add_argument("--name", help="show one built-in tableau")
    p.add_argument("--file", help="load and check a tableau file")
    return parser


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------

def _read_config(path: str | None) -> dict:
    if not path:
        return {}
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise UsageError(f"cannot read config file {path!r}")
    if not cp.has_section("imexap"):
        raise UsageError(f"config file {path!r} has no [imexap] section")
    return {k.replace("-", "_"): v for k, v in cp.items("imexap")}


def _flag_values(args) -> dict:
    vals = {}
    for name in ("model", "gamma", "alpha", "profile", "formulation", "nx", "bc", "cfl", "t_final",
                 "dt_mode", "initial", "v0", "diffusion_stencil", "weno_eps"):
        v = getattr(args, name, None)
        if v is not None:
            vals[name] = v
    if getattr(args, "domain", None) is not None:
        vals["x_lo"], vals["x_hi"] = args.domain
    if getattr(args, "literal_initial_data", None):
        vals["v0"] = "literal"
    if getattr(args, "strict_cfl", False):
        vals["strict_cfl"] = True
    return vals


def resolve_configs(args) -> list[scenarios.RunConfig]:
    """Expand the (possibly comma-listed) scheme and epsilon into run configs."""
    file_vals = _read_config(args.config)
    preset = args.preset or file_vals.pop("preset", None)
    if preset and preset not in scenarios.PRESETS:
        raise UsageError(f"unknown preset {preset!r}")
    base = dict(scenarios.PRESETS[preset]) if preset else {}
    for key, raw in file_vals.items():
        if key not in _RUN_FIELDS:
            raise UsageError(f"unknown config key {key!r}")
        base[key] = _CONVERTERS.get(key, str)(raw)
    if preset == "test4c-variable-alpha" and args.profile and args.t_final is None and "t_final" not in file_vals:
        base["t_final"] = scenarios.PROFILE_T_FINAL[args.profile]
    base.update(_flag_values(args))
    schemes = [s for s in str(args.scheme or base.get("scheme", "bdf2")).split(",") if s]
    eps_text = args.epsilon if args.epsilon is not None else base.get("epsilon", 1.0)
    try:
        epsilons = _float_list(eps_text) if isinstance(eps_text, str) else [float(eps_text)]
    except argparse.ArgumentTypeError as exc:
        raise UsageError(str(exc)) from exc
    out = []
    for sch in schemes:
        for eps in epsilons:
            vals = dict(base, scheme=sch, epsilon=eps)
            try:
                out.append(scenarios.RunConfig(**vals).validate())
            except (ValueError, tableaux.UnknownTableauError, TypeError) as exc:
                raise UsageError(str(exc)) from exc
    if not out:
        raise UsageError("no scheme/epsilon combination selected")
    return out


def _check_custom_tableau(cfg: scenarios.RunConfig):
    tab = tableaux.resolve_tableau(cfg.scheme)
    if not tableaux.has_order(tab, tab.p):
        res = np.max(np.abs(tableaux.verify_order_conditions(tab, tab.p)))
        raise UsageError(f"tableau {tab.name} fails its order-{tab.p} conditions (max residual {res:.3e})")
    return tab


def _open_output(path):
    return open(path, "w", newline="") if path else sys.stdout


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    cfgs = resolve_configs(args)
    if len(cfgs) != 1:
        raise UsageError("run takes a single scheme and epsilon")
    cfg = cfgs[0]
    _check_custom_tableau(cfg)
    state, n_steps = scenarios.build(cfg)
    mass0 = state.mass
    stepper.run(state, n_steps)
    x = state.grid.x
    cols = [x, state.u, state.v]
    header = "x,u,v"
    if cfg.profile:
        cols.append(np.broadcast_to(state.scaling.alpha, x.shape))
        header += ",alpha"
    fh = _open_output(args.output)
    try:
        fh.write(header + "\n")
        for row in zip(*cols):
            fh.write(",".join("%.17g" % val for val in row) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    if args.output:
        meta = {
            "config": cfg.as_dict(),
            "dt": state.dt,
            "steps": state.n,
            "t": state.t,
            "theta_max": state.theta_max,
            "cfl_max": state.cfl_max,
            "implicit_iterations": state.iterations,
            "mass_initial": mass0,
            "mass_final": state.mass,
            "mass_drift": state.mass - mass0,
        }
        with open(args.output + ".meta.json", "w") as mh:
            json.dump(meta, mh, indent=2, sort_keys=True)
            mh.write("\n")
    return EXIT_OK


def cmd_converge(args) -> int:
    if args.levels < 3:
        raise UsageError("converge needs --levels >= 3")
    cfgs = resolve_configs(args)
    fh = _open_output(args.output)
    try:
        first = True
        for cfg in cfgs:
            _check_custom_tableau(cfg)
            solver = scenarios.LevelSolver(cfg)
            base = args.base_nx or cfg.nx
            log.info("converge %s %s eps=%g", cfg.scheme, cfg.formulation, cfg.epsilon)
            rep = reference.convergence_study(
                solver, base, args.levels, scheme=tableaux.resolve_tableau(cfg.scheme).name,
                formulation=cfg.formulation, epsilon=cfg.epsilon,
                alpha=cfg.alpha if cfg.profile is None else float("nan"),
                dx_of=solver.dx, workers=max(1, args.threads),
            )
            rep.to_csv(fh, header=first)
            first = False
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_stability(args) -> int:
    if not args.eps_alpha:
        raise UsageError("--eps-alpha list is empty")
    try:
        tab = tableaux.resolve_tableau(args.scheme)
        scan = stability.scan_region(tab, args.formulation, args.zr_range, args.zi_range,
                                     args.eps_alpha, tuple(args.resolution))
    except (ValueError, tableaux.UnknownTableauError) as exc:
        raise UsageError(str(exc)) from exc
    fh = _open_output(args.output)
    try:
        scan.to_csv(fh)
    finally:
        if fh is not sys.stdout:
            fh.close()
    if args.assert_stable:
        total = scan.stable[0].size
        bad = [(ea, total - n) for ea, n in zip(scan.eps_alpha, scan.stable_area()) if n < total]
        for ea, n_bad in bad:
            print(f"unstable: eps_alpha={ea:g}: {n_bad} of {total} grid points", file=sys.stderr)
        if bad:
            return EXIT_NUMERIC
    return EXIT_OK


def _print_tableau(t: tableaux.ImexLmTableau, fh):
    res = tableaux.verify_order_conditions(t, t.p)
    fh.write(f"{t.name}: s={t.s} p={t.p} bdf={t.is_bdf()} max_residual={np.max(np.abs(res)):.3e}\n")
    fh.write("  a = " + ", ".join("%.17g" % v for v in t.a_arr) + "\n")
    fh.write("  b = " + ", ".join("%.17g" % v for v in t.b_arr) + "\n")
    fh.write("  c = " + ", ".join("%.17g" % v for v in t.c_arr) + "\n")
    fh.write("  c_minus1 = %.17g\n" % t.c_minus1)


def cmd_tableaus(args) -> int:
    try:
        if args.file:
            tabs = [tableaux.load_tableau_file(args.file)]
        elif args.name:
            tabs = [tableaux.builtin_tableau(args.name)]
        else:
            tabs = tableaux.builtin_tableaus()
    except (ValueError, OSError, tableaux.UnknownTableauError) as exc:
        raise UsageError(str(exc)) from exc
    fh = _open_output(args.output)
    try:
        for t in tabs:
            _print_tableau(t, fh)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


COMMANDS = {"run": cmd_run, "converge": cmd_converge, "stability": cmd_stability, "tableaus": cmd_tableaus}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("default")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"imexap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (stepper.SolverError, stepper.CflViolation, FloatingPointError) as exc:
        print(f"imexap: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
