//! Self-contained plotting scripts written next to the CSV outputs. Nothing
//! is plotted at run time.

/// RMSE and bound against the number of Starlink satellites, one panel per
/// error group, from `rmse.csv`.
pub const SWEEP_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot aggregate RMSE (solid) and posterior bound (dashed) per mode."""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "rmse.csv"
series = defaultdict(list)
with open(path) as f:
    for row in csv.DictReader(f):
        if row["statistic"] == "aggregate":
            series[row["mode"]].append(row)

panels = [("pos", "position RMSE (m)", "m"), ("vel", "velocity RMSE (m/s)", "mps"), ("att", "attitude RMSE (rad)", "rad")]
fig, axes = plt.subplots(1, 3, figsize=(15, 4))
for ax, (key, title, unit) in zip(axes, panels):
    for mode, rows in sorted(series.items()):
        rows.sort(key=lambda r: int(r["n_sats"]))
        n = [int(r["n_sats"]) for r in rows]
        line, = ax.plot(n, [float(r[f"{key}_rmse_{unit}"]) for r in rows], "o-", label=mode)
        ax.plot(n, [float(r[f"{key}_bound_{unit}"]) for r in rows], "--", color=line.get_color())
    ax.set_xlabel("Starlink satellites")
    ax.set_ylabel(title)
    ax.set_yscale("log")
    ax.grid(True, which="both", alpha=0.3)
axes[0].legend(fontsize=8)
fig.tight_layout()
fig.savefig("sweep.png", dpi=150)
"#;

/// East/north tracks of every `trajectory_*.csv` in the working directory.
pub const TRAJECTORY_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot east/north tracks of the truth and each filtered trajectory."""
import csv
import glob

import matplotlib.pyplot as plt

def load(path):
    with open(path) as f:
        rows = list(csv.DictReader(f))
    return [float(r["e_m"]) for r in rows], [float(r["n_m"]) for r in rows]

fig, ax = plt.subplots(figsize=(6, 6))
for path in sorted(glob.glob("trajectory_*.csv")):
    e, n = load(path)
    ax.plot(e, n, label=path[len("trajectory_"):-4].replace("_", "+"))
for name in ("truth.csv", "reference.csv"):
    try:
        e, n = load(name)
    except FileNotFoundError:
        continue
    ax.plot(e, n, "k*", label=name[:-4])
ax.set_xlabel("east (m)")
ax.set_ylabel("north (m)")
ax.axis("equal")
ax.grid(True, alpha=0.3)
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig("trajectories.png", dpi=150)
"#;
