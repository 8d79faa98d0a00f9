"""Command-line entry point: run, figure, oracle-check and plot subcommands."""

import argparse
import json
import logging
import sys

import numpy as np

from .config import COMPARISONS, INITIAL_KINDS, OUTPUTS, ConfigError, InitialState, RunConfig, load
from .figures import FIGURE_NAMES, UnknownFigureError, reproduce_figure
from .greens import OMEGA0, TimeGrid, solve
from .oracle import DEFAULT_MODES, discretize_reservoir, exact_green_functions
from .plotting import PlotError, emit_plots
from .reservoir import ReservoirConfig, SpectralDensity, bose_occupation, kelvin_to_theta
from .runner import run

log = logging.getLogger("nmcavity")


def _add_config_flags(p):
    p.add_argument("--config", help="JSON run configuration; flags below override its fields")
    p.add_argument("--s", type=float, nargs="+", help="Ohmicity exponents to sweep")
    p.add_argument("--eta", type=float, nargs="+", help="couplings to sweep")
    p.add_argument("--omega-c", type=float, help="cutoff frequency in units of omega0")
    temp = p.add_mutually_exclusive_group()
    temp.add_argument("--theta", type=float, help="k_B T / (hbar omega0)")
    temp.add_argument("--temperature-k", type=float, help="reservoir temperature in kelvin")
    p.add_argument("--t-end", type=float, help="final time in units of 1/omega0")
    p.add_argument("--n-steps", type=int, help="number of time steps")
    p.add_argument("--initial", choices=INITIAL_KINDS, help="initial cavity state")
    p.add_argument("--alpha0", type=float, nargs=2, metavar=("RE", "IM"), help="coherent amplitude")
    p.add_argument("--n0", type=float, help="initial thermal photon number")
    p.add_argument("--outputs", nargs="+", choices=OUTPUTS)
    p.add_argument("--compare", nargs="*", choices=COMPARISONS)
    p.add_argument("--output-points", type=int, help="rows per CSV (thinned from the solver grid)")
    p.add_argument("--oracle-modes", type=int)
    p.add_argument("--label")


def config_from_args(args):
    """Config file (if any) overlaid with the flags that were actually given."""
    cfg = load(args.config) if args.config else RunConfig()
    changes = {}
    for name in ("s", "eta", "omega_c", "t_end", "n_steps", "outputs", "compare", "output_points",
                 "oracle_modes", "label"):
        val = getattr(args, name)
        if val is not None:
            changes[name] = tuple(val) if isinstance(val, list) else val
    if args.theta is not None:
        changes.update(theta=args.theta, temperature_k=None)
    if args.temperature_k is not None:
        changes.update(temperature_k=args.temperature_k, theta=None)
    if args.initial or args.alpha0 is not None or args.n0 is not None:
        init = cfg.initial
        kind = args.initial or init.kind
        alpha0 = tuple(args.alpha0) if args.alpha0 is not None else init.alpha0
        n0 = args.n0 if args.n0 is not None else init.n0
        changes["initial"] = InitialState(kind=kind, alpha0=alpha0, n0=n0)
    return cfg.replace(**changes) if changes else cfg


def cmd_run(args):
    cfg = config_from_args(args)
    summary, ok = run(cfg, args.out, workers=args.workers)
    for p in summary["points"]:
        if p["status"] == "ok":
            print(f"s={p['s']:g} eta={p['eta']:g}: steady|u|={p['steady_abs_u']:.6g} "
                  f"bound_mode={p['bound_mode']['exists']} -> {p['csv']}")
        else:
            print(f"s={p['s']:g} eta={p['eta']:g}: FAILED {p['message']}")
    if args.plot:
        for path in emit_plots(args.out):
            print(f"wrote {path}")
    return 0 if ok else 1


def cmd_figure(args):
    summary, ok = reproduce_figure(args.name, args.out, workers=args.workers, t_end=args.t_end,
                                   n_steps=args.n_steps)
    print(f"{args.name}: {len(summary['points'])} points written to {args.out}")
    if args.plot:
        for path in emit_plots(args.out):
            print(f"wrote {path}")
    return 0 if ok else 1


def cmd_oracle_check(args):
    theta = kelvin_to_theta(args.temperature_k) if args.temperature_k is not None else args.theta
    grid = TimeGrid(t_end=args.t_end, n_steps=args.n_steps)
    nbar = float(bose_occupation(OMEGA0, theta))
    rows = []
    ok = True
    for s in args.s:
        for eta in args.eta:
            sd = SpectralDensity(eta=eta, s=s, omega_c=args.omega_c)
            gf = solve(ReservoirConfig(spectral=sd, theta=theta), grid)
            dr = discretize_reservoir(sd, n_modes=args.modes)
            if args.t_end > dr.recurrence_time() / 2:
                print(f"warning: window exceeds half the recurrence time {dr.recurrence_time():.1f}")
            uo, vo, resid = exact_green_functions(dr, theta, OMEGA0, grid.times)
            du = float(np.max(np.abs(gf.u - uo)))
            dv = float(np.max(np.abs(gf.v - vo)))
            good = du < 1e-3 and dv < 1e-2 * (1 + nbar)
            ok &= good
            rows.append({"s": s, "eta": eta, "theta": theta, "max_du": du, "max_dv": dv,
                         "unitarity_residual": resid, "pass": good})
            print(f"s={s:g} eta={eta:g} theta={theta:g}: max|du|={du:.3e} max|dv|={dv:.3e} "
                  f"{'PASS' if good else 'FAIL'}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if ok else 1


def cmd_plot(args):
    for path in emit_plots(args.directory, args.out):
        print(f"wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="nmcavity", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="sweep parameter points and write CSV datasets")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, help="parallel points (default: $NMCAVITY_WORKERS or 1)")
    p.add_argument("--plot", action="store_true", help="also render PNGs next to the CSVs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("figure", help="write the dataset of a reference figure")
    p.add_argument("name", help=", ".join(FIGURE_NAMES))
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--t-end", type=float, default=50.0)
    p.add_argument("--n-steps", type=int, default=10000)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("oracle-check", help="compare u, v against a discretized-reservoir solution")
    p.add_argument("--s", type=float, nargs="+", default=[1.0])
    p.add_argument("--eta", type=float, nargs="+", default=[0.1])
    p.add_argument("--omega-c", type=float, default=1.0)
    temp = p.add_mutually_exclusive_group()
    temp.add_argument("--theta", type=float, default=0.0)
    temp.add_argument("--temperature-k", type=float)
    p.add_argument("--t-end", type=float, default=30.0)
    p.add_argument("--n-steps", type=int, default=6000)
    p.add_argument("--modes", type=int, default=DEFAULT_MODES)
    p.add_argument("--json", help="also write the comparison table as JSON")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("plot", help="render PNGs from an existing dataset directory")
    p.add_argument("directory")
    p.add_argument("--out", help="image directory (default: the dataset directory)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for field, msg in exc.errors.items():
            print(f"config error: {field}: {msg}", file=sys.stderr)
        return 2
    except (UnknownFigureError, PlotError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
