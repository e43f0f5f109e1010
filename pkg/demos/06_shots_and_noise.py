"""
Shots, decoherence and zero-noise extrapolation
===============================================

Finite sampling error falls as 1/sqrt(shots).  Relaxation and dephasing are
simulated with stochastic trajectories, and gate folding plus Richardson
extrapolation removes most of the noise bias.
"""

import math

import numpy as np

from qcfd import (NoiseModel, QuantumCircuit, Statevector, estimate_probabilities, gate,
                  mitigated_expectation, noisy_probabilities, sample_shots)

uniform = Statevector.from_vector(np.ones(8))
for ns in (100, 10_000, 1_000_000):
    p, se = estimate_probabilities(sample_shots(uniform, ns, seed=ns))
    print(f"{ns:>8} shots: mean |p - 1/8| = {np.mean(np.abs(p - 1 / 8)):.2e}")

T1 = 275.72e-6
noise = NoiseModel(T1=T1, T2=2 * T1)
for frac in (0.5, 1.0, 2.0):
    circ = QuantumCircuit(1, (gate("X", 0, duration=0.0), gate("DELAY", 0, params=[frac * T1])))
    p, se = noisy_probabilities(circ, noise, 10_000, seed=1)
    print(f"excited population after {frac} T1: {p[1]:.4f} +- {se[1]:.4f} "
          f"(exp(-t/T1) = {math.exp(-frac):.4f})")

device = NoiseModel.preset("sherbrooke-2024")
rx = QuantumCircuit(1, (gate("RX", 0, params=[math.pi]),))
est, pts = mitigated_expectation(rx, [0, 1], device, scales=(1, 3), trajectories=100_000, seed=0)
print("P(1) at scales 1 and 3:", [round(v, 5) for _, v in pts])
print(f"extrapolated P(1): {est:.5f} (ideal 1)")
