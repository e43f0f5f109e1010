"""
Circuits, the QFT and gate accounting
=====================================

Circuits are immutable op lists; ``a + b`` runs ``a`` first.  The QFT emits
n(n+1)/2 + floor(n/2) gates, polynomial in n while the DFT it implements is
2^n x 2^n.
"""

import numpy as np

from qcfd import adjoint, dumps, execute, metrics, new_zero_state, unitary
from qcfd.algorithms import cyclic_shift_circuit, qft_circuit

for n in (2, 4, 6, 8):
    m = metrics(qft_circuit(n))
    print(f"n={n}: {m.gate_count} gates, depth {m.depth}, {m.two_q_gates} two-qubit")

# oracle check against the dense DFT
n = 5
N = 1 << n
k = np.arange(N)
dft = np.exp(2j * np.pi * np.outer(k, k) / N) / np.sqrt(N)
print("max |QFT - DFT| at n=5:", np.max(np.abs(unitary(qft_circuit(n)) - dft)))

# QFT followed by its adjoint is the identity
roundtrip = qft_circuit(3) + adjoint(qft_circuit(3))
print("QFT then QFT^dag is identity:", np.allclose(unitary(roundtrip), np.eye(8)))

# the periodic shift used for streaming, in the plain-text circuit format
shift = cyclic_shift_circuit(3)
print(dumps(shift))
out = execute(shift, new_zero_state(3))
print("shift |000> ->", np.flatnonzero(np.abs(out.amplitudes) > 0.5))
