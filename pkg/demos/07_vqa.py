"""
Variational time marching
=========================

Each step fits s |psi(theta)> to the next field by minimizing the implicit
residual ||M s psi - u||^2 with Nelder-Mead, warm-started from the previous
step.  The ansatz is Ry columns separated by CNOT chains.
"""

import numpy as np

from qcfd import FlowProblem, OptimizerConfig, build_ansatz, gradient_variance, vqa_march

p = FlowProblem(N=16, dt=1e-4, U=10.0, D=1.0)
ansatz = build_ansatz(4, 4)
print("parameters per step:", ansatz.parameter_count, "+ 1 scale")

res = vqa_march(p, "implicit", ansatz, OptimizerConfig(max_iters=2000, cost_tolerance=1e-8), 10)
print(f"10 steps: min fidelity {res.fidelities.min():.8f}, rel error {res.relative_error():.2e}")
print("iterations per step:", [t.iterations for t in res.traces])

# gradients flatten as the register widens (barren plateau)
for n in (2, 4, 6, 8):
    v = gradient_variance(build_ansatz(n, 6), 300, seed=1)
    print(f"n={n}: Var[dC/dtheta_0] = {v:.4f}")
