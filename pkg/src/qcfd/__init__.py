"""qcfd: matrix-free statevector simulation and quantum CFD algorithms."""

__version__ = "0.1.0"

from .errors import (CapacityError, ConditionNumberError, NumericalError, OptimizationError,
                     QcfdError, SingularityError, ValidationError)
from .statevec import (GateMatrix, Statevector, apply_1q, apply_controlled, apply_gate,
                       fidelity, inner_product, new_zero_state)
from .circuit import (CircuitMetrics, CircuitOp, QuantumCircuit, adjoint, append_gate,
                      controlled_power, dumps, execute, gate, loads, metrics, unitary)
from .noise import (BlochAngles, NoiseModel, ShotHistogram, estimate_probabilities,
                    expectation_diagonal, mitigated_expectation, noise_scaled_circuit,
                    noisy_execute, noisy_probabilities, noisy_shots, richardson_extrapolate,
                    shot_extrapolate,
                    run_trajectories, sample_shots)
from .algorithms import (HHL_SUCCESS_FLAG, HermitianOperator, HhlAccuracyWarning, HhlConfig,
                         HhlResult, LcuDecomposition, amplitude_encode, bell_circuit,
                         circulant_lcu, cyclic_shift_circuit, fractional_binary_decode,
                         fractional_binary_encode, hadamard_test, hamiltonian_evolution,
                         hhl_solve, lcu_apply, lcu_circuit, phase_estimation, qft_circuit,
                         swap_test)
from .flow import (CarlemanSystem, FlowProblem, QuantumMarch, StepOperator, analytic_solution,
                   carleman_build, carleman_exact, carleman_march, carleman_truncated,
                   classical_march, discretize, quantum_march)
from .vqa import (Ansatz, OptimizationTrace, OptimizerConfig, ansatz_state, build_ansatz,
                  evaluate_cost, gradient_variance, optimize, vqa_march)
