"""
Plot CSV traces written by the command line
===========================================

Usage: ``python demos/plot_traces.py OUTDIR`` where ``OUTDIR`` came from
``bethe-csma compare --out OUTDIR``.  Needs the ``plot`` extra.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

out = Path(sys.argv[1] if len(sys.argv) > 1 else "compare-out")

# BUM: one column per link, y_0 .. y_{n-1}
with open(out / "bum.csv", encoding="utf-8") as fh:
    header = fh.readline().strip().split(",")
bum = np.loadtxt(out / "bum.csv", delimiter=",", skiprows=1)
cols = [k for k, h in enumerate(header) if h.startswith("y_")]

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
ax1.plot(bum[:, 0], bum[:, cols])
ax1.set(xlabel="t", ylabel="y_i(t)", title="BUM iterates")

# Baselines: running utility per update
for path in sorted(out.glob("*.csv")):
    if path.stem in ("bum", "summary"):
        continue
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    ax2.plot(data[:, 0], data[:, -1], label=path.stem)
ax2.set(xlabel="update", ylabel="utility so far", title="baselines")
ax2.legend()
fig.tight_layout()
fig.savefig(out / "traces.png", dpi=120)
print("wrote", out / "traces.png")
