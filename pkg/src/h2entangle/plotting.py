"""Figure rendering (matplotlib, Agg backend) and the standalone plot script.

Every figure the CLI renders is also reproducible from the CSV files with
the emitted ``plot_outputs.py``, which needs only numpy and matplotlib.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "figure.dpi": 120,
}
# no timestamp or version text in the PNG, so reruns give identical files
_PNG_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, metadata=_PNG_META, bbox_inches="tight")
    plt.close(fig)
    return Path(path)


def _edges(centers):
    c = np.asarray(centers, dtype=float)
    if len(c) == 1:
        return np.array([c[0] - 0.5, c[0] + 0.5])
    h = 0.5 * np.diff(c)
    return np.concatenate([[c[0] - h[0]], c[:-1] + h, [c[-1] + h[-1]]])


def map_figure(path, x, y, z, *, xlabel: str, ylabel: str, title: str = "", cbar: str = "",
               symmetric: bool = True, cmap: str = "RdBu_r"):
    """Colour map of z[i_x, j_y] over bin centres ``x`` and ``y``."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.2, 3.2))
        z = np.ma.masked_invalid(np.asarray(z, dtype=float))
        if symmetric:
            vmax = float(np.nanmax(np.abs(z))) if z.count() else 1.0
            kw = {"vmin": -vmax, "vmax": vmax}
        else:
            kw = {}
        mesh = ax.pcolormesh(_edges(y), _edges(x), z, cmap=cmap, shading="flat", **kw)
        ax.set_xlabel(ylabel)
        ax.set_ylabel(xlabel)
        if title:
            ax.set_title(title)
        fig.colorbar(mesh, ax=ax, label=cbar)
        return _save(fig, path)


def curves_figure(path, x, curves: dict, *, xlabel: str, ylabel: str, title: str = "", errors: dict | None = None):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.2, 3.0))
        for label, y in curves.items():
            if errors and label in errors:
                ax.errorbar(x, y, yerr=errors[label], fmt="o", ms=2.5, lw=0.8, label=label)
            else:
                ax.plot(x, y, lw=1.2, label=label)
        ax.axhline(0.0, color="0.6", lw=0.5)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(curves) > 1:
            ax.legend(frameon=False, fontsize=7)
        return _save(fig, path)


def jes_figure(path, jes):
    kc = 0.5 * (jes.ker_edges[1:] + jes.ker_edges[:-1])
    ec = 0.5 * (jes.ee_edges[1:] + jes.ee_edges[:-1])
    counts = jes.counts.astype(float)
    counts[counts == 0] = np.nan
    return map_figure(path, kc, ec, counts, xlabel="KER (eV)", ylabel="electron energy (eV)",
                      title="joint energy spectrum", cbar="counts", symmetric=False, cmap="viridis")


PLOT_SCRIPT = '''\
"""Re-plot the CSV outputs of an h2entangle run.

usage: python plot_outputs.py [RUN_DIR]

Reads every *.csv in RUN_DIR (default: this file's directory) and writes a
PNG next to it.  Long-format files with three or more columns are drawn as
maps of the last column over the first two; others as curves.
"""

import sys
from pathlib import Path

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    header = lines[0].strip().split(",")
    rows = [ln.strip().split(",") for ln in lines[1:] if ln.strip()]
    return header, rows


def numeric(col):
    try:
        return np.array([float(v) for v in col])
    except ValueError:
        return None


def plot_long(path, header, rows):
    cols = list(zip(*rows)) if rows else [[] for _ in header]
    data = [numeric(c) for c in cols]
    keys = [i for i, d in enumerate(data) if d is None]
    groups = sorted(set(zip(*[cols[k] for k in keys]))) if keys else [()]
    for g in groups:
        sel = np.ones(len(rows), bool)
        for k, v in zip(keys, g):
            sel &= np.array([c == v for c in cols[k]])
        num = [i for i, d in enumerate(data) if d is not None]
        x, y = data[num[0]][sel], data[num[1]][sel]
        fig, ax = plt.subplots(figsize=(4.2, 3.2))
        if len(num) >= 3:
            z = data[num[2]][sel]
            xs, ys = np.unique(x), np.unique(y)
            grid = np.full((len(xs), len(ys)), np.nan)
            grid[np.searchsorted(xs, x), np.searchsorted(ys, y)] = z
            m = ax.pcolormesh(ys, xs, grid, shading="nearest", cmap="RdBu_r")
            fig.colorbar(m, ax=ax, label=header[num[2]])
            ax.set_xlabel(header[num[1]])
            ax.set_ylabel(header[num[0]])
        else:
            ax.plot(x, y)
            ax.set_xlabel(header[num[0]])
            ax.set_ylabel(header[num[1]])
        tag = "_".join(g)
        ax.set_title(f"{path.stem} {tag}".strip())
        out = path.with_name(f"{path.stem}{'_' + tag if tag else ''}.replot.png")
        fig.savefig(out, bbox_inches="tight")
        plt.close(fig)
        print(out)


def main(argv):
    run = Path(argv[1]) if len(argv) > 1 else Path(__file__).resolve().parent
    for path in sorted(run.glob("*.csv")):
        header, rows = load(path)
        if len(header) >= 2 and rows:
            plot_long(path, header, rows)


if __name__ == "__main__":
    main(sys.argv)
'''


def write_plot_script(directory) -> Path:
    path = Path(directory) / "plot_outputs.py"
    path.write_text(PLOT_SCRIPT)
    return path
