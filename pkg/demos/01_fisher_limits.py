"""How the cofluorescent Fisher matrix degrades as two sources approach.

Run: python3 demos/01_fisher_limits.py
"""
import numpy as np

from blinkfim import SourceModel, fim_blinking, fim_cofluorescent, invert_info

N, sigma, delta = 10_000, 1.0, 0.3
L0 = 2 * sigma**2 / N

print("s/sigma   F11        F12        F22      L_x1/L0   L_x2/L0")
for s in (1e-4, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 12.0):
    m = SourceModel.pair_1d(s * sigma, delta, sigma, N)
    F = np.asarray(fim_cofluorescent(m))
    L = invert_info(F).variances / L0
    print(f"{s:7.4f} {F[0, 0]:10.2f} {F[0, 1]:10.2f} {F[1, 1]:10.2f} {L[0]:9.3g} {L[1]:9.3g}")

# Near coincidence the matrix collapses onto rank one, (N/sigma^2) mu mu^T,
# so neither coordinate can be bounded.
m = SourceModel.pair_1d(1e-4, delta, sigma, N)
print("\nrank-one limit:\n", N / sigma**2 * np.outer(m.weights, m.weights))

# Far apart the PSFs stop overlapping and photons become attributable.
far = SourceModel.pair_1d(12.0, delta, sigma, N)
print("blinking at s=12:\n", np.asarray(fim_blinking(far)))
