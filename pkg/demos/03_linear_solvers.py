"""
Quantum linear solvers: HHL and LCU
===================================

HHL inverts a Hermitian matrix through phase estimation and a controlled
rotation; the answer is a unit vector read from the post-selected register.
LCU applies a non-unitary matrix written as a positive sum of unitaries.
"""

import numpy as np

from qcfd import FlowProblem, HhlConfig, Statevector, discretize, hhl_solve, lcu_apply
from qcfd.flow import step_lcu

rng = np.random.default_rng(0)
q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
A = (q * np.array([1.0, 2.5, 4.0, 6.0])) @ q.T
b = rng.normal(size=4)

res = hhl_solve(A, b, HhlConfig(clock_qubits=8))
print(f"HHL fidelity vs dense solve: {res.fidelity:.6f}")
print(f"post-selection success probability: {res.success_probability:.3e}")

# a larger rotation constant raises the success probability
res = hhl_solve(A, b, HhlConfig(clock_qubits=8, rotation_constant=0.9))
print(f"with C=0.9: fidelity {res.fidelity:.6f}, success {res.success_probability:.3f}")

# explicit advection-diffusion step as identity plus cyclic shifts
problem = FlowProblem()
op = discretize(problem, "explicit")
decomp = step_lcu(op)
print("LCU terms:", decomp.m, "normalization:", round(decomp.normalization, 4))
u = problem.initial_field()
out, p = lcu_apply(decomp, Statevector.from_vector(u))
print("max |LCU - dense|:", np.max(np.abs(out.to_field().real - op.matrix @ u)))
print(f"success probability {p:.4f}")
