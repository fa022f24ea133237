"""
Figure data
===========

Each figure is a set of parameter sweeps written as one CSV.  Plotting is
optional and needs matplotlib.
"""

import sys

import numpy as np

from cascadelaser import figure_job, run_figure

out = sys.argv[1] if len(sys.argv) > 1 else None

# Duan sum against the population difference for three gains.
fig4 = run_figure(figure_job("fig4"), out, plot=out is not None)
for label in fig4.labels():
    rows = fig4.series(label)
    y = np.array([r["duan_sum"] for r in rows])
    i = int(np.argmin(y))
    print(f"{label:>6}: minimum Duan sum {y[i]:.3f} at eta={rows[i]['eta']:.3f}")

#%%
# Mean photon number with and without the coherent drive.
fig6 = run_figure(figure_job("fig6", count=50), out, plot=out is not None)
dark, lit = (np.array([r["mean_photon"] for r in fig6.series(label)]) for label in fig6.labels())
print(f"drive adds between {np.min(lit - dark):.0f} and {np.max(lit - dark):.0f} photons")
