"""Static line plots rebuilt from CSV datasets (no recomputation)."""

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .figures import MANIFEST_FILE  # noqa: E402
from .runner import SUMMARY_FILE, read_csv  # noqa: E402

golden_mean = (5**0.5 - 1) / 2
fig_width = 4.5

params = {
    "font.family": "sans-serif",
    "font.sans-serif": ["DejaVu Sans"],
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 7,
    "lines.linewidth": 1.2,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "svg.hashsalt": "nmcavity",
}

colors = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"]


class PlotError(ValueError):
    pass


def _run_manifest(directory):
    """Default panels for a plain sweep: one image per point and quantity."""
    with open(directory / SUMMARY_FILE) as fh:
        summary = json.load(fh)
    panels = []
    for point in summary["points"]:
        if point.get("status") != "ok":
            continue
        csv_name = point["csv"]
        header = _header(directory / csv_name)
        stem = csv_name[:-4]
        for col, ylabel in (("abs_u", "|u(t)|"), ("v", "v(t)"), ("kappa", "kappa(t)"), ("n", "n(t)")):
            if col not in header:
                continue
            series = [{"csv": csv_name, "column": col, "label": "exact", "style": "-"}]
            if col + "_bm" in header:
                series.append({"csv": csv_name, "column": col + "_bm", "label": "BM", "style": "--"})
            panels.append({"file": f"{stem}_{col}.png", "title": f"s = {point['s']:g}, eta = {point['eta']:g}",
                           "xlabel": "omega0 t", "ylabel": ylabel, "series": series})
    return {"figure": summary.get("label", "run"), "title": "", "panels": panels}


def _header(path):
    with open(path) as fh:
        return fh.readline().strip().split(",")


def load_manifest(directory):
    directory = Path(directory)
    if (directory / MANIFEST_FILE).exists():
        with open(directory / MANIFEST_FILE) as fh:
            return json.load(fh)
    if (directory / SUMMARY_FILE).exists():
        return _run_manifest(directory)
    raise PlotError(f"{directory} holds no dataset: expected {MANIFEST_FILE} (figure dataset) or "
                    f"{SUMMARY_FILE} (sweep output) next to point_*.csv files")


def _check(directory, manifest):
    missing_files = set()
    missing_cols = {}
    headers = {}
    for panel in manifest["panels"]:
        for ser in panel["series"]:
            path = directory / ser["csv"]
            if not path.exists():
                missing_files.add(ser["csv"])
                continue
            if ser["csv"] not in headers:
                headers[ser["csv"]] = _header(path)
            if ser["column"] not in headers[ser["csv"]]:
                missing_cols.setdefault(ser["csv"], set()).add(ser["column"])
    msgs = []
    if missing_files:
        msgs.append("missing files: " + ", ".join(sorted(missing_files)))
    for name, cols in sorted(missing_cols.items()):
        msgs.append(f"{name} lacks columns: " + ", ".join(sorted(cols)))
    if msgs:
        raise PlotError("; ".join(msgs))


def emit_plots(directory, outdir=None):
    """Render one PNG per manifest panel; returns the written paths."""
    directory = Path(directory)
    outdir = Path(outdir) if outdir is not None else directory
    manifest = load_manifest(directory)
    _check(directory, manifest)
    cache = {}
    written = []
    with plt.rc_context(params):
        for panel in manifest["panels"]:
            fig, ax = plt.subplots()
            palette = {}
            for ser in panel["series"]:
                if ser["csv"] not in cache:
                    cache[ser["csv"]] = read_csv(directory / ser["csv"])
                data = cache[ser["csv"]]
                # a curve and its " BM" partner share a colour
                base = ser["label"].removesuffix(" BM")
                color = palette.setdefault(base, colors[len(palette) % len(colors)])
                ax.plot(data["t"], data[ser["column"]], ser["style"], label=ser["label"], color=color)
            ax.set_xlabel(panel["xlabel"])
            ax.set_ylabel(panel["ylabel"])
            ax.set_title(panel["title"])
            ax.legend(frameon=False)
            fig.tight_layout()
            path = outdir / panel["file"]
            fig.savefig(path, metadata={"Software": None})
            plt.close(fig)
            written.append(path)
    return written
