"""Parameter sweeps: per-point CSV files, metadata sidecars and a merged summary."""

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import FORMAT_VERSION, STRONG_ETAS, WEAK_ETAS, ConfigError
from .dynamics import (U_SINGULAR, bm_coefficients, coefficients, evolve_coherent, evolve_thermal,
                       evolve_vacuum, fock_cutoff, photon_number, second_order_coefficients)
from .greens import (OMEGA0, SOLVER_EPS, TimeGrid, bm_green_functions, bm_solution, bound_mode_diagnostic,
                     solve, stationary_value)
from .oracle import discretize_reservoir, exact_green_functions
from .reservoir import ReservoirConfig, SpectralDensity, bose_occupation

log = logging.getLogger(__name__)

WORKERS_ENV = "NMCAVITY_WORKERS"
SUMMARY_FILE = "summary.json"
STEADY_WINDOW = 5.0
NUMBER_FORMAT = ".12g"

TOLERANCES = {
    "solver_eps": SOLVER_EPS,
    "u_singular": U_SINGULAR,
    "steady_window": STEADY_WINDOW,
    "steady_rtol": 1e-3,
    "fock_tail": 1e-10,
}


def point_stem(s, eta):
    return f"point_s{s:g}_eta{eta:g}"


def _rounded(x):
    """Round-trip through the CSV number format so summaries match the file."""
    return np.array([float(format(v, NUMBER_FORMAT)) for v in np.asarray(x, dtype=float)]) + 0.0


def output_indices(n_steps, n_points):
    stride = max(1, -(-n_steps // (n_points - 1)))
    idx = np.arange(0, n_steps + 1, stride)
    if idx[-1] != n_steps:
        idx = np.r_[idx, n_steps]
    return idx


def compute_point(config, s, eta):
    """All requested columns for one (s, eta) point, plus its summary entry."""
    sd = SpectralDensity(eta=eta, s=s, omega_c=config.omega_c)
    theta = config.resolved_theta
    cfg = ReservoirConfig(spectral=sd, theta=theta)
    grid = TimeGrid(t_end=config.t_end, n_steps=config.n_steps)
    gf = solve(cfg, grid)
    problems = gf.check()
    if problems:
        raise RuntimeError("; ".join(problems))
    idx = output_indices(grid.n_steps, config.output_points)
    init = config.initial
    bm = bm_solution(cfg)
    cols = {"t": grid.times[idx]}
    want = set(config.outputs)
    comp = set(config.compare)

    ct = coefficients(gf)
    n = photon_number(gf, init.mean)
    if "green" in want:
        cols["re_u"] = gf.u.real[idx]
        cols["im_u"] = gf.u.imag[idx]
        cols["abs_u"] = np.abs(gf.u)[idx]
        cols["v"] = gf.v[idx]
    if "coefficients" in want:
        valid = ct.valid[idx]
        for name in ("omega_prime", "kappa", "kappa_tilde"):
            cols[name] = np.where(valid, getattr(ct, name)[idx], 0.0)
        cols["coef_valid"] = valid.astype(int)
    if "observables" in want:
        cols["n"] = n[idx]
        if init.kind == "coherent":
            a = gf.u[idx] * init.alpha
            cols["re_a"] = a.real
            cols["im_a"] = a.imag
    if "bm" in comp:
        u_bm, v_bm = bm_green_functions(bm, grid)
        if "green" in want:
            cols["re_u_bm"] = u_bm.real[idx]
            cols["im_u_bm"] = u_bm.imag[idx]
            cols["abs_u_bm"] = np.abs(u_bm)[idx]
            cols["v_bm"] = v_bm[idx]
        if "coefficients" in want:
            bc = bm_coefficients(bm, grid)
            cols["omega_prime_bm"] = bc.omega_prime[idx]
            cols["kappa_bm"] = bc.kappa[idx]
            cols["kappa_tilde_bm"] = bc.kappa_tilde[idx]
        if "observables" in want:
            cols["n_bm"] = (np.abs(u_bm) ** 2 * init.mean + v_bm)[idx]
    if "second_order" in comp and "coefficients" in want:
        so = second_order_coefficients(cfg, grid)
        cols["omega_prime_2nd"] = so.omega_prime[idx]
        cols["kappa_2nd"] = so.kappa[idx]
        cols["kappa_tilde_2nd"] = so.kappa_tilde[idx]
    oracle_residual = None
    if "oracle" in comp:
        dr = discretize_reservoir(sd, n_modes=config.oracle_modes)
        uo, vo, oracle_residual = exact_green_functions(dr, theta, OMEGA0, cols["t"])
        cols["re_u_oracle"] = uo.real
        cols["im_u_oracle"] = uo.imag
        cols["v_oracle"] = vo
    cols = {k: v if k == "coef_valid" else _rounded(v) for k, v in cols.items()}

    populations = None
    if "populations" in want:
        populations = _populations(gf, init, idx)

    summary = _summarize(cols, gf, ct, sd, cfg, n, idx)
    if oracle_residual is not None:
        summary["oracle_unitarity_residual"] = float(oracle_residual)
    return cols, populations, summary


def _populations(gf, init, idx):
    peak = float(np.max(np.abs(gf.u) ** 2 * init.mean + gf.v))
    n_cut = fock_cutoff(peak)
    rows = []
    for j in idx:
        if init.kind == "vacuum":
            st = evolve_vacuum(gf, j)
        elif init.kind == "thermal":
            st = evolve_thermal(gf, init.n0, j)
        else:
            st = evolve_coherent(gf, init.alpha, j, n_cutoff=n_cut)
        rows.append(st.populations(n_cut))
    return np.array(rows)


def _summarize(cols, gf, ct, sd, cfg, n, idx):
    t = cols["t"]
    bound = bound_mode_diagnostic(sd)
    out = {
        "s": sd.s,
        "eta": sd.eta,
        "theta": cfg.theta,
        "n_bar": float(bose_occupation(OMEGA0, cfg.theta)),
        "bound_mode": {"exists": bound.exists, "threshold_eta": bound.threshold_eta,
                       "binding_integral": bound.binding_integral},
    }
    abs_u = cols["abs_u"] if "abs_u" in cols else _rounded(np.abs(gf.u)[idx])
    mean, drift, _ = stationary_value(t, abs_u, window=STEADY_WINDOW)
    out["steady_abs_u"] = mean
    out["steady_abs_u_drift"] = drift
    out["plateau"] = bool(mean > 0.1 and drift < TOLERANCES["steady_rtol"])
    if "v" in cols:
        vmean, vdrift, _ = stationary_value(t, cols["v"], window=STEADY_WINDOW)
        out["v_final"] = vmean
        out["v_final_drift"] = vdrift
    kappa = ct.kappa[ct.valid]
    out["kappa_min"] = float(np.min(kappa))
    out["kappa_negative"] = bool(np.any(kappa < 0))
    out["singular_intervals"] = [[float(gf.times[a]), float(gf.times[b])] for a, b in ct.singular_intervals]
    out["n_revival"] = _has_revival(n)
    out["strong_coupling_panel"] = bool(sd.eta >= STRONG_ETAS[0])
    return out


def _has_revival(n, rtol=1e-6):
    """True when n(t) falls to an interior minimum and then rises again."""
    k = int(np.argmin(n))
    if k == 0 or k == len(n) - 1:
        return False
    scale = rtol * max(1.0, abs(n[k]))
    return bool(n[0] - n[k] > scale and np.max(n[k:]) - n[k] > scale)


def write_csv(path, cols):
    names = list(cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        n_rows = len(cols[names[0]])
        for i in range(n_rows):
            row = []
            for k in names:
                x = cols[k][i]
                row.append(str(int(x)) if k == "coef_valid" else format(float(x), NUMBER_FORMAT))
            w.writerow(row)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(len(rows) - 1, len(header))
    return {k: data[:, i] for i, k in enumerate(header)}


def metadata(config, s, eta):
    return {
        "format_version": FORMAT_VERSION,
        "code_version": __version__,
        "config": config.to_dict(),
        "point": {"s": s, "eta": eta, "theta": config.resolved_theta},
        "solver": {
            "u": "AB2 predictor, trapezoidal corrector, rotating frame",
            "v": "incremental trapezoidal double sum",
            "thermal_kernel": "Bose series (Hurwitz zeta)",
            "dt": config.dt,
            "n_steps": config.n_steps,
        },
        "tolerances": TOLERANCES,
        "eta_grids": {"weak": list(WEAK_ETAS), "strong": list(STRONG_ETAS),
                      "note": "intermediate values are implementation defaults"},
    }


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_point(config, s, eta, outdir):
    """Compute and write one point; failures come back as an error entry."""
    stem = point_stem(s, eta)
    try:
        cols, pops, summary = compute_point(config, s, eta)
    except Exception as exc:  # reported per point, the sweep continues
        log.error("point s=%g eta=%g failed: %s", s, eta, exc)
        return {"s": s, "eta": eta, "status": "error", "message": f"{type(exc).__name__}: {exc}"}
    outdir = Path(outdir)
    write_csv(outdir / f"{stem}.csv", cols)
    _write_json(outdir / f"{stem}.meta.json", metadata(config, s, eta))
    if pops is not None:
        pcols = {"t": cols["t"]}
        pcols.update({f"p{k}": pops[:, k] for k in range(pops.shape[1])})
        write_csv(outdir / f"{stem}_populations.csv", pcols)
    summary.update(status="ok", csv=f"{stem}.csv")
    return summary


def worker_count(workers=None):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError({WORKERS_ENV: f"not an integer: {env!r}"}) from None
    return 1


def run(config, outdir, workers=None):
    """Run every (s, eta) point; returns (summary dict, all_ok)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    points = config.points()
    n_workers = min(worker_count(workers), len(points))
    if n_workers == 1:
        results = [run_point(config, s, eta, outdir) for s, eta in points]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(run_point, config, s, eta, outdir) for s, eta in points]
            results = [f.result() for f in futures]
    summary = {
        "format_version": FORMAT_VERSION,
        "code_version": __version__,
        "label": config.label,
        "config": config.to_dict(),
        "points": results,
    }
    _write_json(outdir / SUMMARY_FILE, summary)
    ok = all(r["status"] == "ok" for r in results)
    return summary, ok
