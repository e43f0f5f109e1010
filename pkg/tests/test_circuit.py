import numpy as np
import pytest
from hypothesis import given, strategies as st

from qcfd.algorithms import bell_circuit, qft_circuit
from qcfd.circuit import (DEFAULT_1Q_DURATION, DEFAULT_2Q_DURATION, CircuitOp, QuantumCircuit,
                          adjoint, append_gate, controlled_power, dumps, execute, gate, loads,
                          metrics, rotation_matrix, unitary)
from qcfd.errors import ValidationError
from qcfd.statevec import Statevector, fidelity, new_zero_state
from oracles import random_state, random_unitary

KINDS_1Q = ["H", "X", "Y", "Z", "S", "SDG", "T", "TDG", "I"]
ROT = ["RX", "RY", "RZ", "P"]


@st.composite
def circuits(draw, max_qubits=4, max_ops=12, allow_unitary=True):
    n = draw(st.integers(1, max_qubits))
    ops = []
    for _ in range(draw(st.integers(0, max_ops))):
        qubits = draw(st.permutations(range(n)))
        kind = draw(st.sampled_from(KINDS_1Q + ROT + (["SWAP"] if n > 1 else [])
                                    + (["UNITARY"] if allow_unitary else [])))
        ntarg = 2 if kind == "SWAP" else 1
        nctrl = draw(st.integers(0, n - ntarg))
        targets = qubits[:ntarg]
        controls = qubits[ntarg:ntarg + nctrl]
        params = [draw(st.floats(-7, 7, allow_nan=False))] if kind in ROT else []
        matrix = None
        if kind == "UNITARY":
            matrix = random_unitary(2, np.random.default_rng(draw(st.integers(0, 1000))))
        ops.append(CircuitOp(kind, tuple(targets), tuple(controls), tuple(params), matrix=matrix))
    return QuantumCircuit(n, tuple(ops))


class TestAppend:
    def test_empty_plus_h(self):
        c = append_gate(QuantumCircuit(1), gate("H", 0))
        assert len(c) == 1

    def test_counts_sum(self):
        c = QuantumCircuit(2)
        for op in (gate("H", 0), gate("X", 1, controls=[0]), gate("Z", 1)):
            c = append_gate(c, op)
        m = metrics(c)
        assert m.one_q_gates + m.two_q_gates == 3

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            append_gate(QuantumCircuit(2), gate("H", 2))

    def test_immutable(self):
        c = QuantumCircuit(1)
        c2 = c.append(gate("H", 0))
        assert len(c) == 0 and len(c2) == 1


class TestAdjoint:
    def test_h_self_adjoint(self):
        assert adjoint(QuantumCircuit(1, (gate("H", 0),))).ops == (gate("H", 0),)

    def test_ry_negates(self):
        op = adjoint(QuantumCircuit(1, (gate("RY", 0, params=[0.3]),))).ops[0]
        assert op.kind == "RY" and op.params == (-0.3,)

    def test_qft_roundtrip(self, rng):
        c = qft_circuit(5)
        psi = Statevector(5, random_state(5, rng))
        out = execute(adjoint(c), execute(c, psi))
        assert fidelity(out, psi) > 1 - 1e-10

    def test_measure_rejected(self):
        with pytest.raises(ValidationError):
            adjoint(QuantumCircuit(1, (gate("MEASURE", 0),)))

    @given(circuits())
    def test_involution(self, c):
        assert adjoint(adjoint(c)).ops == c.ops

    @given(circuits(), st.integers(0, 2**32 - 1))
    def test_inverse_action(self, c, seed):
        psi = Statevector(c.n_qubits, random_state(c.n_qubits, np.random.default_rng(seed)))
        out = execute(adjoint(c), execute(c, psi))
        np.testing.assert_allclose(out.amplitudes, psi.amplitudes, atol=1e-10)


class TestControlledPower:
    def test_power_one_on_controlled_subspace(self, rng):
        body = QuantumCircuit(2, (gate("H", 0),))
        c = controlled_power(body, 1, 1)
        U = unitary(c)
        Hm = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        np.testing.assert_allclose(U[np.ix_([2, 3], [2, 3])], Hm, atol=1e-15)
        np.testing.assert_allclose(U[np.ix_([0, 1], [0, 1])], np.eye(2), atol=1e-15)

    def test_rz_squared(self):
        theta = 0.37
        body = QuantumCircuit(2, (gate("RZ", 0, params=[theta]),))
        U = unitary(controlled_power(body, 2, 1))
        np.testing.assert_allclose(U[np.ix_([2, 3], [2, 3])], rotation_matrix("RZ", 2 * theta),
                                   atol=1e-14)

    def test_control_off_is_identity(self, rng):
        body = QuantumCircuit(3, (gate("H", 0), gate("X", 1, controls=[0])))
        psi = np.zeros(8, complex)
        psi[:4] = random_state(2, rng)  # qubit 2 (control) is 0
        out = execute(controlled_power(body, 3, 2), Statevector(3, psi))
        np.testing.assert_allclose(out.amplitudes, psi, atol=1e-15)

    def test_bad_power(self):
        with pytest.raises(ValidationError):
            controlled_power(QuantumCircuit(2, (gate("H", 0),)), 0, 1)


class TestMetrics:
    def test_bell(self):
        m = metrics(bell_circuit())
        assert (m.depth, m.one_q_gates, m.two_q_gates, m.width) == (2, 1, 1, 2)
        assert m.total_duration == pytest.approx(DEFAULT_1Q_DURATION + DEFAULT_2Q_DURATION)

    @pytest.mark.parametrize("n", range(1, 9))
    def test_qft_gate_count(self, n):
        assert metrics(qft_circuit(n)).gate_count == n * (n + 1) // 2 + n // 2

    def test_empty(self):
        m = metrics(QuantumCircuit(3))
        assert m.depth == 0 and m.gate_count == 0

    def test_greedy_packing(self):
        c = QuantumCircuit(3, (gate("H", 0), gate("H", 1), gate("X", 2, controls=[1]),
                               gate("H", 0)))
        assert metrics(c).depth == 2

    @given(circuits())
    def test_depth_bounded_by_op_count(self, c):
        m = metrics(c)
        assert m.depth <= len(c) and m.width == c.n_qubits

    def test_disjoint_insertion_keeps_depth(self):
        base = QuantumCircuit(3, (gate("H", 0), gate("X", 1, controls=[0]), gate("H", 1)))
        extra = base.append(gate("Z", 2))
        assert metrics(extra).depth == metrics(base).depth


class TestExecute:
    def test_bell(self):
        out = execute(bell_circuit(), new_zero_state(2))
        np.testing.assert_allclose(out.amplitudes, np.array([1, 0, 0, 1]) / np.sqrt(2))

    def test_empty(self, rng):
        psi = Statevector(3, random_state(3, rng))
        np.testing.assert_array_equal(execute(QuantumCircuit(3), psi).amplitudes, psi.amplitudes)

    def test_xx(self):
        out = execute(QuantumCircuit(1, (gate("X", 0), gate("X", 0))), new_zero_state(1))
        np.testing.assert_array_equal(out.amplitudes, [1, 0])

    def test_size_mismatch(self):
        with pytest.raises(ValidationError):
            execute(bell_circuit(), new_zero_state(3))

    def test_input_untouched(self):
        psi = new_zero_state(2)
        execute(bell_circuit(), psi)
        assert psi.amplitudes[0] == 1

    @given(circuits(max_qubits=3), st.integers(0, 2**32 - 1))
    def test_composition(self, c, seed):
        rng = np.random.default_rng(seed)
        d = QuantumCircuit(c.n_qubits, tuple(
            gate("RY", int(q), params=[float(rng.uniform(-3, 3))]) for q in range(c.n_qubits)))
        psi = Statevector(c.n_qubits, random_state(c.n_qubits, rng))
        np.testing.assert_allclose(execute(c + d, psi).amplitudes,
                                   execute(d, execute(c, psi)).amplitudes, atol=1e-12)

    @given(circuits(max_qubits=3))
    def test_unitary_is_unitary(self, c):
        U = unitary(c)
        np.testing.assert_allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=1e-12)


class TestOps:
    def test_nan_angle_rejected(self):
        with pytest.raises(ValidationError):
            gate("RY", 0, params=[float("nan")])

    def test_negative_duration_rejected(self):
        with pytest.raises(ValidationError):
            gate("H", 0, duration=-1e-9)

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            gate("FOO", 0)

    def test_default_durations(self):
        assert gate("H", 0).time == DEFAULT_1Q_DURATION
        assert gate("X", 0, controls=[1]).time == DEFAULT_2Q_DURATION
        assert gate("DELAY", 0, params=[1e-6]).time == 1e-6


class TestSerialization:
    @given(circuits())
    def test_roundtrip(self, c):
        assert loads(dumps(c)).ops == c.ops

    def test_format(self):
        c = QuantumCircuit(3, (gate("RY", 2, controls=[0, 1], params=[0.5], duration=3.5e-8),))
        text = dumps(c)
        assert text.splitlines()[0] == "QUBITS 3"
        assert "RY 2 c=0,1 p=0.5 d=3.5e-08" in text

    def test_comments_and_blank_lines(self):
        c = loads("# bell\nQUBITS 2\n\nH 0\nX 1 c=0\n")
        assert c.ops == bell_circuit().ops

    def test_bad_line(self):
        with pytest.raises(ValidationError):
            loads("QUBITS 1\nH 5\n")
