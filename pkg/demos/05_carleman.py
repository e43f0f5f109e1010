"""
Carleman linearization of dx/dt = x^2
=====================================

The nonlinear ODE becomes a linear system in y_k = x^k truncated at order K.
Higher orders track the exact x0 / (1 - x0 t) for longer.
"""

import numpy as np

from qcfd import carleman_build, carleman_exact, carleman_march

x0 = 0.8
for K in range(2, 7):
    t, x = carleman_march(carleman_build(K), x0, 0.5)
    exact = np.array([carleman_exact(x0, ti) for ti in t])
    err = np.abs(x - exact)
    bad = np.flatnonzero(err >= 1e-3)
    depart = t[bad[0]] if bad.size else t[-1]
    print(f"K={K}: max error on [0, 0.5] = {err.max():.2e}, within 1e-3 until t = {depart:.3f}")

print("Carleman matrix, K=4:")
print(carleman_build(4).matrix)
