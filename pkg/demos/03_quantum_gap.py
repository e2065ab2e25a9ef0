"""Quantum Fisher information: blinking versus simultaneous emission.

The trace gap N beta / sigma^2 is largest at s = 2 sigma.
"""
import numpy as np

from blinkfim import (GaussianPSF, SourceModel, beta, fim_cofluorescent, qfim_blinking_1d,
                      qfim_cofluorescent_1d, qfim_pure_state)

N, sigma = 10_000, 1.0
Q1 = qfim_pure_state(GaussianPSF(sigma), [0.3, -1.0])
print("pure-state QFIM of one 2D Gaussian:\n", np.asarray(Q1).round(12))

for delta in (0.0, 0.5):
    s = np.linspace(0.0, 6.0, 13)
    gap = [qfim_blinking_1d(N, sigma, delta).trace()
           - qfim_cofluorescent_1d(N, sigma, delta, x).trace() for x in s]
    print(f"\ndelta={delta}: peak gap {max(gap):.2f} at s={s[int(np.argmax(gap))]:.1f}, "
          f"closed form {N * (1 - delta**2) / (2 * np.e * sigma**2):.2f}")

# Q bounds F from above; both coincide only for the blinking scenario.
for s in (0.5, 2.0, 5.0):
    Q = qfim_cofluorescent_1d(N, sigma, 0.0, s)
    F = fim_cofluorescent(SourceModel.pair_1d(s, 0.0, sigma, N))
    print(f"s={s}: beta={float(beta(s, sigma, 0.0)):.4f}  "
          f"min eig(Q - F) = {np.linalg.eigvalsh(np.asarray(Q) - np.asarray(F))[0]:.2f}")
