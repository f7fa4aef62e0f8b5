"""Predicted decay exponent of |X_k - x*|^2 over the (p, q) plane.

Prints a coarse character map of the mean-square (L2) and almost-sure (AS)
exponents for source exponent xi = 1/4 and the best cell of each.

Run: python demos/rate_heatmap.py
"""

from fractions import Fraction as F

import numpy as np

from regsgd.analysis import theoretical_heatmap
from regsgd.schedules import optimal_schedule

SHADES = " .:-=+*#%@"
grid = np.arange(40) / 40

for mode in ("L2", "AS"):
    res = theoretical_heatmap(mode, 0.25, grid, grid)
    top = res.theoretical.max()
    print(f"{mode}: rows q from 1 down to 0, columns p from 0 to 1")
    for j in range(grid.size - 1, -1, -2):
        row = res.theoretical[:, j]
        print("  " + "".join(SHADES[int(round(v / top * (len(SHADES) - 1)))] if v > 0 else " " for v in row))
    p, q, v = res.argmax
    best = optimal_schedule(F(1, 4), mode)
    print(f"  grid best p={p:.3f} q={q:.3f} exponent {v:.4f}; optimum p={float(best[0]):.4f} "
          f"q={float(best[1]):.4f} exponent {float(best[2]):.4f}\n")
