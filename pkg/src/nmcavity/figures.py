"""Dataset recipes for the six reference figures.

Each recipe is an ordinary sweep plus a ``figure.json`` manifest naming the
panels and the CSV columns drawn in them, so plots are rebuilt from files.
"""

import json
from pathlib import Path

from .config import SPECTRAL_CLASSES, STRONG_ETAS, WEAK_ETAS, InitialState, RunConfig
from .runner import point_stem, run

MANIFEST_FILE = "figure.json"
FIGURE_NAMES = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6")

ROOM_KELVIN = 2.0
COLD_KELVIN = 0.002
N0 = 50.0

# column drawn, its Born-Markov partner, y label
_PANEL_COLUMNS = {
    "fig1": ("abs_u", "abs_u_bm", "|u(t)|"),
    "fig2": ("kappa", "kappa_bm", "kappa(t)"),
    "fig3": ("v", "v_bm", "v(t)"),
    "fig5": ("n", "n_bm", "n(t)"),
    "fig6": ("n", "n_bm", "n(t)"),
}

_TITLES = {
    "fig1": "Exact and Born-Markov |u(t)|",
    "fig2": "Exact and Born-Markov dissipation coefficient",
    "fig3": "Exact and Born-Markov v(t), T = 2 K",
    "fig4": "Long-time u(t), v(t) and n(t), s = 1/2, eta = 0.1",
    "fig5": "Mean photon number, T = 2 K, n(0) = 50",
    "fig6": "Mean photon number, T = 0.002 K, n(0) = 50",
}


class UnknownFigureError(ValueError):
    pass


def s_label(s):
    return {0.5: "s=1/2"}.get(s, f"s={s:g}")


def figure_config(name, t_end=50.0, n_steps=10000):
    """RunConfig for a figure; t_end and n_steps shrink it for quick looks."""
    etas = WEAK_ETAS + STRONG_ETAS
    base = dict(s=SPECTRAL_CLASSES, eta=etas, temperature_k=ROOM_KELVIN, t_end=t_end, n_steps=n_steps,
                compare=("bm",), label=name)
    if name == "fig1":
        return RunConfig(outputs=("green",), **base)
    if name == "fig2":
        return RunConfig(outputs=("coefficients",), **base)
    if name == "fig3":
        return RunConfig(outputs=("green",), **base)
    if name == "fig4":
        long_end = 6 * t_end
        return RunConfig(s=(0.5,), eta=(0.1,), temperature_k=ROOM_KELVIN, t_end=long_end,
                         n_steps=int(round(n_steps * long_end / t_end / 2)),
                         initial=InitialState(kind="thermal", n0=N0), outputs=("green", "observables"),
                         compare=("bm",), output_points=3001, label=name)
    if name in ("fig5", "fig6"):
        base["temperature_k"] = ROOM_KELVIN if name == "fig5" else COLD_KELVIN
        return RunConfig(initial=InitialState(kind="thermal", n0=N0), outputs=("observables",), **base)
    raise UnknownFigureError(f"unknown figure {name!r}; choose from {', '.join(FIGURE_NAMES)}")


def figure_manifest(name, config):
    panels = []
    if name == "fig4":
        csv_name = point_stem(0.5, 0.1) + ".csv"
        panels.append(_panel(name, "u", "u(t)", [
            (csv_name, "re_u", "Re u", "-"), (csv_name, "im_u", "Im u", "-"), (csv_name, "abs_u", "|u|", "-"),
            (csv_name, "abs_u_bm", "|u| BM", "--")]))
        panels.append(_panel(name, "v", "v(t)", [(csv_name, "v", "exact", "-"), (csv_name, "v_bm", "BM", "--")]))
        panels.append(_panel(name, "n", "n(t)", [(csv_name, "n", "exact", "-"), (csv_name, "n_bm", "BM", "--")]))
    else:
        col, bm_col, ylabel = _PANEL_COLUMNS[name]
        for eta in config.eta:
            series = []
            for s in config.s:
                csv_name = point_stem(s, eta) + ".csv"
                series.append((csv_name, col, s_label(s), "-"))
                series.append((csv_name, bm_col, s_label(s) + " BM", "--"))
            panel = _panel(name, f"eta{eta:g}", ylabel, series)
            panel["title"] = f"eta = {eta:g}"
            panels.append(panel)
    return {"figure": name, "title": _TITLES[name], "panels": panels}


def _panel(name, key, ylabel, series):
    return {
        "file": f"{name}_{key}.png",
        "title": key,
        "xlabel": "omega0 t",
        "ylabel": ylabel,
        "series": [{"csv": c, "column": col, "label": lab, "style": sty} for c, col, lab, sty in series],
    }


def reproduce_figure(name, outdir, workers=None, t_end=50.0, n_steps=10000):
    """Write the figure's CSV datasets, summary and manifest into ``outdir``."""
    config = figure_config(name, t_end=t_end, n_steps=n_steps)
    outdir = Path(outdir)
    summary, ok = run(config, outdir, workers=workers)
    with open(outdir / MANIFEST_FILE, "w") as fh:
        json.dump(figure_manifest(name, config), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary, ok
