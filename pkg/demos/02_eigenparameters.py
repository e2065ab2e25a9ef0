"""Which parameter combinations are best determined.

The dominant eigenvector of a 2x2 Fisher matrix sits at angle xi; the
best-determined combination is b = x1 cos xi + x2 sin xi.
"""
import numpy as np

from blinkfim import SourceModel, eigen_analysis, eigen_bounds, fim_cofluorescent

N = 10_000
for delta in (0.0, 0.5):
    print(f"delta = {delta}")
    for s in (0.2, 0.5, 1.0, 2.0, 3.0, 5.0, 9.0):
        F = fim_cofluorescent(SourceModel.pair_1d(s, delta, 1.0, N))
        L, rep = eigen_bounds(F)
        print(f"  s={s:4.1f}  xi/pi={rep.xi / np.pi:+.4f}  L_bb={L[0]:.3e}  L_ww={L[1]:.3e}")

# Equal brightness flips from centroid-like to separation-like dominance.
small = eigen_analysis(fim_cofluorescent(SourceModel.pair_1d(0.5, 0.0, 1.0, N))).xi
large = eigen_analysis(fim_cofluorescent(SourceModel.pair_1d(4.0, 0.0, 1.0, N))).xi
print(f"xi at s=0.5: {small:+.4f}, at s=4: {large:+.4f}")
