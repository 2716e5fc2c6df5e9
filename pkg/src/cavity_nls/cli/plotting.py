"""Emitter for stand-alone plotting scripts (matplotlib is only needed to run them)."""

_TEMPLATE = '''"""Render {csv} as a delay/frequency heatmap.  Usage: python {script}"""
import csv
import os

import matplotlib.pyplot as plt
import numpy as np

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "{csv}")) as fh:
    rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
header, data = rows[0], np.array(rows[1:], dtype=float)
tau = np.unique(data[:, header.index("{ycol}")])
omega = np.unique(data[:, header.index("{xcol}")])
grid = np.full((tau.size, omega.size), np.nan)
iy = np.searchsorted(tau, data[:, header.index("{ycol}")])
ix = np.searchsorted(omega, data[:, header.index("{xcol}")])
grid[iy, ix] = data[:, header.index("{zcol}")]
lim = np.nanmax(np.abs(grid))
fig, ax = plt.subplots(figsize=(5, 4))
mesh = ax.pcolormesh(omega, tau, grid, cmap="RdBu_r", vmin=-lim, vmax=lim, shading="auto")
fig.colorbar(mesh, ax=ax, label="{zcol}")
ax.set_xlabel("{xlabel}")
ax.set_ylabel("{ylabel}")
ax.set_title("{title}")
fig.tight_layout()
fig.savefig(os.path.join(here, "{png}"), dpi=150)
'''


def heatmap_script(csv_name, title, xcol="omega_rot", ycol="tau_delta", zcol="dT"):
    script = "plot_" + csv_name.rsplit(".", 1)[0] + ".py"
    text = _TEMPLATE.format(csv=csv_name, script=script, xcol=xcol, ycol=ycol, zcol=zcol,
                            xlabel="omega - omega_L [kappa]", ylabel="tau_delta [1/kappa]", title=title,
                            png=csv_name.rsplit(".", 1)[0] + ".png")
    return script, text
