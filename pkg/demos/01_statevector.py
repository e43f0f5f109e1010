"""
Matrix-free statevector simulation
==================================

Gates act on the amplitude array in place through strided reshapes, so no
2^n x 2^n operator is ever formed.  Qubit 0 is the least significant bit of
the basis index.
"""

import time

import numpy as np

from qcfd import Statevector, apply_1q, apply_controlled, fidelity, new_zero_state

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
X = np.array([[0, 1], [1, 0]])

# Bell state: H on qubit 0 then CNOT 0 -> 1
psi = new_zero_state(2)
apply_1q(psi, H, 0)
apply_controlled(psi, X, [0], 1)
print("Bell amplitudes:", np.round(psi.amplitudes.real, 4))

# a classical field is stored as a unit vector plus its norm
field = np.array([3.0, 0.0, 4.0, 0.0])
sv = Statevector.from_vector(field)
print("encoded field:", sv.to_field().real, "norm", sv.classical_norm)

# fidelity is the squared overlap of normalized states
print("fidelity(|0>, |+>) =", fidelity([1, 0], H @ [1, 0]))

# a single gate on 22 qubits touches 4M amplitudes
big = new_zero_state(22)
t0 = time.perf_counter()
apply_1q(big, H, 11)
print(f"H on qubit 11 of a 22-qubit state: {1e3 * (time.perf_counter() - t0):.1f} ms")
