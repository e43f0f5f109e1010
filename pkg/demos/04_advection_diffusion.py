"""
Advection-diffusion: classical, HHL and LCU marching
====================================================

u_t + U u_x = D u_xx on a periodic grid of 16 points, dt = 1e-4 s, U = 10,
D = 1.  Each quantum step is checked against the classical step.
"""

import numpy as np

from qcfd import (FlowProblem, HhlConfig, analytic_solution, classical_march, discretize,
                  quantum_march)

p = FlowProblem(N=16, L=1.0, dt=1e-4, U=10.0, D=1.0)
op_e, op_i = discretize(p, "explicit"), discretize(p, "implicit")
print(f"diffusion number {op_e.diffusion_number:.4f}, Courant number {op_e.courant_number:.4f}")

u0 = p.initial_field()
exact = analytic_solution(p, p.grid, 0.01)
for name, op in (("explicit", op_e), ("implicit", op_i)):
    u = classical_march(op, u0, 100)[-1]
    print(f"{name}: relative error vs analytic at t=0.01: "
          f"{np.linalg.norm(u - exact) / np.linalg.norm(exact):.4f}")

lcu = quantum_march(op_e, u0, 100, "lcu")
print(f"LCU march: min step fidelity {lcu.fidelities.min():.12f}, "
      f"final rel error {lcu.relative_error():.2e}")

hhl = quantum_march(op_i, u0, 20, "hhl", HhlConfig(clock_qubits=8))
print(f"HHL march (20 steps): min fidelity {hhl.fidelities.min():.10f}, "
      f"rel error {hhl.relative_error():.2e}")

# a Gaussian pulse advects and spreads
g = FlowProblem.gaussian()
traj = classical_march(discretize(g, "implicit"), g.initial_field(), 100)
print("Gaussian peak moves from x =", g.grid[np.argmax(traj[0])], "to", g.grid[np.argmax(traj[-1])])
