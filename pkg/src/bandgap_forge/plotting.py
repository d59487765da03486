"""Static figures (matplotlib, Agg backend) and generated plot scripts."""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import TOOL, _plain  # noqa: E402

# fixed PNG metadata keeps the files byte-stable across runs
_PNG_META = {"Software": TOOL}


def _save(fig, path, config) -> Path:
    path = Path(path)
    meta = dict(_PNG_META)
    meta["Description"] = json.dumps(_plain(config), sort_keys=True)
    fig.savefig(path, dpi=110, metadata=meta)
    plt.close(fig)
    return path


def plot_bands(bandset, path, config: dict, targets=(), gaps=()) -> Path:
    """Fiber eigenvalues per theta index with the error-inflated band ranges alongside."""
    fig, (ax, axr) = plt.subplots(1, 2, figsize=(8, 4.5), sharey=True,
                                  gridspec_kw={"width_ratios": [4, 1]})
    idx = np.arange(bandset.values.shape[0])
    for n in range(bandset.n_bands):
        ax.errorbar(idx, bandset.values[:, n], yerr=bandset.errors[:, n], fmt=".", ms=3, lw=0.6)
    for lo, hi in bandset.inflated():
        axr.fill_between([0, 1], lo, hi, color="0.6")
    for a, b in gaps:
        axr.axhspan(a, b, color="tab:green", alpha=0.25)
    for t in targets:
        for a_ in (ax, axr):
            a_.axhline(t, color="tab:red", lw=0.8, ls="--")
    ax.set_xlabel("theta index (row-major midpoint grid)")
    ax.set_ylabel(f"{bandset.kind} fiber eigenvalue")
    axr.set_xticks([])
    axr.set_title("bands")
    fig.suptitle(f"{bandset.kind} bands, r = {bandset.r:g}, grid {bandset.grid}x{bandset.grid}")
    fig.tight_layout()
    return _save(fig, path, config)


def plot_convergence(results, path, config: dict) -> Path:
    """Resolvent error against 1/|ln r| (with the fitted line) and C_error against r."""
    fig, (ax, bx) = plt.subplots(1, 2, figsize=(9, 4))
    for res in results:
        x = np.array([row["inv_log_r"] for row in res.rows])
        e = res.errors
        ax.plot(x, e, "o-", label=f"M = {res.M}")
        xx = np.linspace(0, x.max() * 1.05, 20)
        ax.plot(xx, res.kappa * xx, ":", color="0.4")
        r = np.array([row["r"] for row in res.rows])
        c = np.array([row["C_error"] for row in res.rows])
        bx.loglog(r, c, "s-", label=f"M = {res.M}")
    ax.set_xlabel("1/|ln r|")
    ax.set_ylabel("resolvent error")
    ax.set_xlim(left=0)
    ax.set_ylim(bottom=0)
    ax.legend()
    bx.set_xlabel("r")
    bx.set_ylabel("||C_r - C_0||")
    bx.legend()
    fig.tight_layout()
    return _save(fig, path, config)


BANDS_SCRIPT = '''#!/usr/bin/env python3
"""Plot {csv}: fiber eigenvalues per theta index with error bars.

Generated by {tool}; needs numpy and matplotlib only.  Usage: python3 {name} [out.png]
"""
import sys
from pathlib import Path

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
data = np.genfromtxt(here / "{csv}", delimiter=",", skip_header=2, names=True)
fig, ax = plt.subplots(figsize=(7, 4.5))
for n in np.unique(data["band"]):
    sel = data["band"] == n
    ax.errorbar(data["theta_index"][sel], data["value"][sel], yerr=data["err"][sel], fmt=".", ms=3, lw=0.6)
ax.set_xlabel("theta index")
ax.set_ylabel("{kind} fiber eigenvalue")
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else here / "{stem}_replot.png", dpi=110)
'''


def write_bands_script(csv_path, kind: str, config: dict) -> Path:
    csv_path = Path(csv_path)
    name = f"plot_{csv_path.stem}.py"
    text = BANDS_SCRIPT.format(csv=csv_path.name, tool=TOOL, name=name, kind=kind, stem=csv_path.stem)
    header = "# config: " + json.dumps(_plain(config), sort_keys=True) + "\n"
    path = csv_path.with_name(name)
    path.write_text(text.replace("\n", "\n" + header, 1))
    return path
