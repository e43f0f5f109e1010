"""Named quantum subroutines built on the circuit IR.

Register layout conventions used throughout:

* data register on the low qubits ``0 .. m-1``;
* auxiliary registers (QPE clock, LCU selector, test ancilla) above it.

HHL success flag
----------------
The eigenvalue-inversion ancilla is rotated so that its ``|0>`` component
carries amplitude ``C / lambda``; a run is accepted when that ancilla reads
``HHL_SUCCESS_FLAG`` (= 0) and the clock register has been uncomputed to
``|0...0>``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import CircuitOp, QuantumCircuit, adjoint, controlled_power, execute, gate
from .errors import ConditionNumberError, ValidationError
from .noise import ShotHistogram, sample_shots
from .statevec import GateMatrix, Statevector, fidelity, new_zero_state

HHL_SUCCESS_FLAG = 0
MAX_EVOLUTION_DIM = 1 << 12


class HhlAccuracyWarning(UserWarning):
    """Clock register too narrow for the spectrum; carries the measured fidelity."""

    def __init__(self, message, fidelity):
        super().__init__(message)
        self.fidelity = fidelity


# -- small circuits -----------------------------------------------------------

def bell_circuit() -> QuantumCircuit:
    return QuantumCircuit(2, (gate("H", 0), gate("X", 1, controls=[0])))


def qft_circuit(n: int, inverse: bool = False) -> QuantumCircuit:
    """Quantum Fourier transform on ``n`` qubits.

    Maps ``|j>`` to ``2^{-n/2} sum_k exp(2 pi i j k / 2^n) |k>`` with qubit 0 as
    the least significant bit.  Emits ``n`` H gates, ``n(n-1)/2`` controlled
    phases and ``floor(n/2)`` swaps.
    """
    if not 1 <= n <= 25:
        raise ValidationError(f"QFT width must be in [1, 25], got {n}")
    ops = []
    for j in range(n - 1, -1, -1):
        ops.append(gate("H", j))
        for k in range(j - 1, -1, -1):
            ops.append(gate("P", j, controls=[k], params=[math.pi / (1 << (j - k))]))
    for i in range(n // 2):
        ops.append(gate("SWAP", i, n - 1 - i))
    circ = QuantumCircuit(n, tuple(ops))
    return adjoint(circ) if inverse else circ


def cyclic_shift_circuit(n: int, direction: int = 1) -> QuantumCircuit:
    """``|i> -> |(i + direction) mod 2^n>`` via a multi-controlled-X ladder."""
    if n < 1:
        raise ValidationError(f"need n >= 1, got {n}")
    if direction not in (1, -1):
        raise ValidationError(f"direction must be +1 or -1, got {direction}")
    inc = QuantumCircuit(n, tuple(gate("X", q, controls=range(q)) for q in range(n - 1, -1, -1)))
    return inc if direction == 1 else adjoint(inc)


# -- encodings ----------------------------------------------------------------

def uniformly_controlled_ry(angles, controls: Sequence[int], target: int) -> list[CircuitOp]:
    """Multiplexed ``Ry``: rotate ``target`` by ``angles[c]`` when the controls read ``c``.

    Bit ``b`` of ``c`` is the value of ``controls[b]``.  Uses the Gray-code
    construction with ``2^k`` single rotations and ``2^k`` CNOTs; collapses to
    one plain rotation when all angles agree.
    """
    angles = np.asarray(angles, dtype=float)
    k = len(controls)
    if angles.shape != (1 << k,):
        raise ValidationError(f"need {1 << k} angles for {k} controls")
    if np.allclose(angles, angles[0], rtol=0, atol=1e-15):
        return [gate("RY", target, params=[angles[0]])] if abs(angles[0]) > 1e-15 else []
    size = 1 << k
    gray = np.arange(size) ^ (np.arange(size) >> 1)
    parity = np.array([[bin(c & g).count("1") & 1 for g in gray] for c in range(size)])
    theta = ((-1.0) ** parity).T @ angles / size
    ops = []
    for i in range(size):
        if abs(theta[i]) > 1e-15:
            ops.append(gate("RY", target, params=[theta[i]]))
        flip = int(gray[i] ^ gray[(i + 1) % size])
        ops.append(gate("X", target, controls=[controls[flip.bit_length() - 1]]))
    return ops


def amplitude_encode(data) -> tuple[QuantumCircuit, float]:
    """Circuit preparing ``data / ||data||`` from ``|0...0>``, plus ``||data||``.

    Binary tree of (uniformly controlled) ``Ry`` rotations, ``O(len(data))``
    gates.  The most significant qubit is split first; signs are carried by the
    last level.
    """
    x = np.asarray(data)
    if np.iscomplexobj(x):
        if np.any(np.abs(x.imag) > 0):
            raise ValidationError("amplitude_encode supports real data only")
        x = x.real
    x = x.astype(float).ravel()
    k = x.size.bit_length() - 1
    if x.size < 2 or x.size != 1 << k:
        raise ValidationError(f"data length must be a power of two >= 2, got {x.size}")
    norm = float(np.linalg.norm(x))
    if norm == 0 or not np.isfinite(norm):
        raise ValidationError("cannot encode an all-zero or non-finite vector")
    ops = []
    for level in range(k):
        target = k - 1 - level
        blocks = x.reshape(1 << level, 2, 1 << target)
        if target == 0:
            angles = 2 * np.arctan2(blocks[:, 1, 0], blocks[:, 0, 0])
        else:
            angles = 2 * np.arctan2(np.linalg.norm(blocks[:, 1], axis=1),
                                    np.linalg.norm(blocks[:, 0], axis=1))
        controls = list(range(target + 1, k))
        if level == 0 and abs(angles[0] - math.pi / 2) < 1e-14:
            ops.append(gate("H", target))
            continue
        if level > 0 and np.allclose(angles, math.pi / 2, rtol=0, atol=1e-14):
            ops.append(gate("H", target))
            continue
        ops.extend(uniformly_controlled_ry(angles, controls, target))
    return QuantumCircuit(k, tuple(ops)), norm


def fractional_binary_encode(value: float, n: int) -> int:
    """Basis index whose fractional-binary reading truncates ``value`` to ``n`` bits."""
    if n < 1:
        raise ValidationError("need n >= 1")
    if not 0 <= value < 1:
        raise ValidationError(f"value must lie in [0, 1), got {value}")
    return int(math.floor(value * (1 << n)))


def fractional_binary_decode(index: int, n: int) -> float:
    if n < 1:
        raise ValidationError("need n >= 1")
    if not 0 <= index < 1 << n:
        raise ValidationError(f"index {index} does not fit in {n} bits")
    return index / (1 << n)


# -- Hamiltonian evolution --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HermitianOperator:
    matrix: np.ndarray
    hermitian: bool = True

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("operator must be square")
        dim = m.shape[0]
        if dim < 2 or dim & (dim - 1):
            raise ValidationError(f"operator dimension must be a power of two, got {dim}")
        scale = max(1.0, float(np.max(np.abs(m))))
        if self.hermitian and np.max(np.abs(m - m.conj().T)) > 1e-12 * scale:
            raise ValidationError("operator is not Hermitian")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def hamiltonian_evolution(H, t: float) -> GateMatrix:
    """``exp(-i H t)`` by exact eigendecomposition."""
    op = H if isinstance(H, HermitianOperator) else HermitianOperator(H)
    if not op.hermitian:
        raise ValidationError("hamiltonian_evolution needs a Hermitian operator")
    if op.dim > MAX_EVOLUTION_DIM:
        raise ValidationError(f"dimension {op.dim} exceeds {MAX_EVOLUTION_DIM}")
    w, v = np.linalg.eigh(op.matrix)
    return GateMatrix((v * np.exp(-1j * w * t)) @ v.conj().T)


def _as_circuit(unitary) -> QuantumCircuit:
    if isinstance(unitary, QuantumCircuit):
        return unitary
    m = unitary.entries if isinstance(unitary, GateMatrix) else np.asarray(unitary, complex)
    k = m.shape[0].bit_length() - 1
    return QuantumCircuit(k, (CircuitOp("UNITARY", tuple(range(k)), matrix=m),))


def _product_state(low: np.ndarray, n_total: int) -> Statevector:
    """``|0...0>_high (x) low`` on ``n_total`` qubits."""
    amps = np.zeros(1 << n_total, dtype=complex)
    amps[:low.size] = low
    return Statevector(n_total, amps)


# -- phase estimation -----------------------------------------------------------

def phase_estimation_circuit(unitary, l: int) -> QuantumCircuit:
    """QPE with the data register on the low qubits and ``l`` clock qubits above."""
    if l < 1:
        raise ValidationError(f"need at least one clock qubit, got {l}")
    u = _as_circuit(unitary)
    m = u.n_qubits
    n = m + l
    body = u.remap(list(range(m)), n)
    circ = QuantumCircuit(n, tuple(gate("H", m + j) for j in range(l)))
    for j in range(l):
        circ = circ + controlled_power(body, 1 << j, m + j)
    iqft = qft_circuit(l, inverse=True).remap(list(range(m, n)), n)
    return circ + iqft


def phase_estimation_distribution(unitary, l: int, eigenstate: Statevector) -> np.ndarray:
    """Exact probabilities of the ``2^l`` clock readings."""
    circ = phase_estimation_circuit(unitary, l)
    m = circ.n_qubits - l
    if eigenstate.n_qubits != m:
        raise ValidationError("eigenstate does not match the unitary's register")
    out = execute(circ, _product_state(eigenstate.amplitudes, circ.n_qubits), copy=False)
    return (np.abs(out.amplitudes) ** 2).reshape(1 << l, 1 << m).sum(axis=1)


def phase_estimation(unitary, l: int, eigenstate: Statevector, shots: int = 1024,
                     seed=None) -> ShotHistogram:
    """Histogram of ``l``-bit clock readings; reading ``k`` means phase ``k / 2^l``.

    The eigenphase ``phi`` is defined by ``U|psi> = exp(2 pi i phi)|psi>``.
    """
    probs = phase_estimation_distribution(unitary, l, eigenstate)
    clock = Statevector(l, np.sqrt(probs / probs.sum()).astype(complex))
    return sample_shots(clock, shots, seed)


# -- HHL ----------------------------------------------------------------------------

@dataclass
class HhlConfig:
    """``evolution_time`` and ``rotation_constant`` are chosen automatically when None."""

    clock_qubits: int = 8
    evolution_time: float | None = None
    rotation_constant: float | None = None
    shots: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.clock_qubits < 1:
            raise ValidationError("clock_qubits must be >= 1")


@dataclass
class HhlResult:
    solution: np.ndarray
    success_probability: float
    fidelity: float
    evolution_time: float
    rotation_constant: float
    signed_spectrum: bool
    circuit: QuantumCircuit = field(repr=False)

    def __iter__(self):
        return iter((self.solution, self.success_probability))


def gershgorin_bounds(M) -> tuple[float, float]:
    """Interval containing the (real) spectrum of a Hermitian matrix."""
    M = np.asarray(M)
    centre = np.real(np.diag(M))
    radius = np.sum(np.abs(M), axis=1) - np.abs(np.diag(M))
    return float(np.min(centre - radius)), float(np.max(centre + radius))


def hhl_circuit(H: np.ndarray, b: np.ndarray, l: int, t0: float, C: float,
                signed: bool) -> QuantumCircuit:
    """State prep, QPE of ``exp(i H t0)``, eigenvalue inversion, inverse QPE."""
    m = H.shape[0].bit_length() - 1
    n = m + l + 1
    anc = m + l
    clocks = list(range(m, m + l))
    prep, _ = amplitude_encode(b)
    ops = list(prep.ops)
    qpe = [gate("H", c) for c in clocks]
    for j, c in enumerate(clocks):
        u = hamiltonian_evolution(H, -t0 * (1 << j))
        qpe.append(CircuitOp("UNITARY", tuple(range(m)), (c,), matrix=u.entries))
    qpe.extend(qft_circuit(l, inverse=True).remap(clocks, n).ops)
    qpe_circ = QuantumCircuit(n, tuple(qpe))
    ks = np.arange(1 << l)
    if signed:
        ks = np.where(ks >= 1 << (l - 1), ks - (1 << l), ks)
    lam = 2 * math.pi * ks / (t0 * (1 << l))
    amp = np.zeros(ks.size)
    nz = ks != 0
    amp[nz] = np.clip(C / lam[nz], -1.0, 1.0)
    # flag |0> carries C/lambda; k = 0 is sent entirely to the reject branch
    angles = 2 * np.arccos(amp)
    rot = uniformly_controlled_ry(angles, clocks, anc)
    full = QuantumCircuit(n, tuple(ops)) + qpe_circ + QuantumCircuit(n, tuple(rot)) + adjoint(qpe_circ)
    return full


def hhl_solve(M, b, config: HhlConfig | None = None) -> HhlResult:
    """Solve ``M x = b`` up to normalization with the HHL circuit.

    Non-Hermitian ``M`` is replaced by its Hermitian dilation
    ``[[0, M], [M^dag, 0]]`` acting on ``(b, 0)``.  The clock register is read as
    unsigned when the Gershgorin interval is positive and as two's complement
    otherwise.  The returned ``solution`` is the post-selected data register
    (unit norm); ``fidelity`` compares it with a dense solve and is reported for
    diagnostics only.
    """
    config = config or HhlConfig()
    M = np.asarray(M, dtype=complex)
    b = np.asarray(b, dtype=complex).ravel()
    N = M.shape[0]
    if M.ndim != 2 or M.shape != (N, N) or N < 2 or N & (N - 1):
        raise ValidationError(f"M must be square with power-of-two size, got {M.shape}")
    if b.shape != (N,):
        raise ValidationError("b does not match M")
    if not np.any(b):
        raise ValidationError("b must be nonzero")
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise ConditionNumberError(f"M is singular or ill-conditioned (cond = {sv[0] / max(sv[-1], 1e-300):.3e})")
    real_problem = not np.any(M.imag) and not np.any(b.imag)
    hermitian = np.max(np.abs(M - M.conj().T)) <= 1e-12 * sv[0]
    if hermitian:
        H, rhs = M, b
    else:
        H = np.block([[np.zeros_like(M), M], [M.conj().T, np.zeros_like(M)]])
        rhs = np.concatenate([b, np.zeros_like(b)])
    if real_problem:
        rhs = rhs.real
    l = config.clock_qubits
    lo, hi = gershgorin_bounds(H)
    signed = lo <= 0
    if config.evolution_time is not None:
        t0 = float(config.evolution_time)
    elif signed:
        t0 = 2 * math.pi * (0.5 - 2.0 ** -l) / max(abs(lo), abs(hi))
    else:
        t0 = 2 * math.pi * (1 - 2.0 ** -l) / hi
    C = config.rotation_constant or 2 * math.pi / (t0 * (1 << l))
    circ = hhl_circuit(H, rhs, l, t0, C, signed)
    m = H.shape[0].bit_length() - 1
    out = execute(circ, new_zero_state(circ.n_qubits), copy=False).amplitudes
    # ancilla is the top qubit, so the first half of the amplitudes is the flag branch
    flag = out.reshape(2, -1)[HHL_SUCCESS_FLAG]
    success = float(np.sum(np.abs(flag) ** 2))
    block = flag[: 1 << m]
    if config.shots:
        counts = sample_shots(Statevector(circ.n_qubits, out), config.shots,
                              config.seed).to_array().reshape(2, -1)[HHL_SUCCESS_FLAG]
        success = float(counts.sum() / config.shots)
        # sampling recovers magnitudes only
        block = np.sqrt(counts[: 1 << m].astype(float))
    x = block if hermitian else block[N:]
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise ConditionNumberError("post-selected register is empty; increase clock_qubits or shots")
    x = x / nrm
    if real_problem and not config.shots:
        x = x.real / np.linalg.norm(x.real)
    exact = np.linalg.solve(M, b)
    fid = fidelity(x, exact)
    if fid < 0.99:
        warnings.warn(HhlAccuracyWarning(
            f"HHL fidelity {fid:.4f} < 0.99 with {l} clock qubits", fid), stacklevel=2)
    return HhlResult(x, success, fid, t0, C, signed, circ)


# -- linear combination of unitaries --------------------------------------------

@dataclass
class LcuDecomposition:
    """``M = sum_i alpha_i U_i`` with every ``alpha_i > 0``."""

    terms: list

    def __post_init__(self):
        if not self.terms:
            raise ValidationError("LCU decomposition needs at least one term")
        fixed = []
        widths = set()
        for alpha, u in self.terms:
            if not alpha > 0:
                raise ValidationError(f"LCU coefficients must be > 0, got {alpha}")
            circ = _as_circuit(u)
            widths.add(circ.n_qubits)
            fixed.append((float(alpha), circ))
        if len(widths) != 1:
            raise ValidationError(f"LCU terms act on different register widths {widths}")
        self.terms = fixed

    @property
    def m(self) -> int:
        return len(self.terms)

    @property
    def normalization(self) -> float:
        return sum(a for a, _ in self.terms)

    @property
    def n_qubits(self) -> int:
        return self.terms[0][1].n_qubits

    @property
    def ancilla_qubits(self) -> int:
        return max(0, (self.m - 1).bit_length())

    def dense(self) -> np.ndarray:
        from .circuit import unitary
        return sum(a * unitary(u) for a, u in self.terms)


def lcu_circuit(decomp: LcuDecomposition) -> QuantumCircuit:
    """PREPARE, SELECT, PREPARE^dag with the selector above the data register."""
    n = decomp.n_qubits
    a = decomp.ancilla_qubits
    total = n + a
    anc = list(range(n, total))
    if a == 0:
        return decomp.terms[0][1]
    weights = np.zeros(1 << a)
    weights[:decomp.m] = np.sqrt([al / decomp.normalization for al, _ in decomp.terms])
    prep, _ = amplitude_encode(weights)
    prep = prep.remap(anc, total)
    select = []
    for i, (_, u) in enumerate(decomp.terms):
        flips = [gate("X", q) for b, q in enumerate(anc) if not (i >> b) & 1]
        select.extend(flips)
        select.extend(controlled_power(u.remap(list(range(n)), total), 1, anc).ops)
        select.extend(flips)
    return prep + QuantumCircuit(total, tuple(select)) + adjoint(prep)


def lcu_apply(decomp: LcuDecomposition, state: Statevector):
    """Apply ``M / lambda`` probabilistically; returns ``(state or None, success_probability)``.

    On success the output amplitudes are ``M psi / ||M psi||`` and its
    ``classical_norm`` is rescaled so ``to_field()`` equals ``M`` applied to the
    input field.  ``None`` is returned when the success probability is zero.
    """
    if state.n_qubits != decomp.n_qubits:
        raise ValidationError("state does not match the LCU register")
    circ = lcu_circuit(decomp)
    out = execute(circ, _product_state(state.amplitudes, circ.n_qubits), copy=False)
    block = out.amplitudes[: 1 << state.n_qubits]
    success = float(np.sum(np.abs(block) ** 2))
    if success < 1e-28:
        return None, 0.0
    amps = block / math.sqrt(success)
    lam = decomp.normalization
    return Statevector(state.n_qubits, amps, state.classical_norm * lam * math.sqrt(success)), success


def circulant_lcu(coefficients: dict, n: int) -> LcuDecomposition:
    """LCU for ``sum_s c_s S^s`` where ``(S^s u)_i = u_{i+s}`` on ``2^n`` periodic points.

    Negative coefficients move their sign into the unitary as a global phase.
    """
    terms = []
    for shift, c in sorted(coefficients.items()):
        if c == 0:
            continue
        ops = []
        steps = abs(int(shift))
        # (S u)_i = u_{i+1} moves basis state |i+1> to |i>: a decrement
        direction = -1 if shift > 0 else 1
        for _ in range(steps):
            ops.extend(cyclic_shift_circuit(n, direction).ops)
        if c < 0:
            ops.append(gate("GPHASE", 0, params=[math.pi]))
        if not ops:
            ops.append(gate("I", 0))
        terms.append((abs(c), QuantumCircuit(n, tuple(ops))))
    return LcuDecomposition(terms)


# -- overlap estimators -------------------------------------------------------------

def _ancilla_p0(circ: QuantumCircuit, init: Statevector, shots, seed) -> float:
    """Probability that the top qubit (the test ancilla) reads 0."""
    out = execute(circ, init, copy=False)
    if shots is None:
        return float(np.sum(np.abs(out.amplitudes.reshape(2, -1)[0]) ** 2))
    hist = sample_shots(out, shots, seed)
    return hist.marginal([circ.n_qubits - 1]).probability(0)


def swap_test(a: Statevector, b: Statevector, shots: int | None = 1000, seed=None) -> float:
    """Estimate ``|<a|b>|^2`` from the ancilla statistics of the swap test.

    ``shots=None`` returns the exact ancilla expectation instead of sampling.
    """
    if a.n_qubits != b.n_qubits:
        raise ValidationError("swap test needs equal-size states")
    if shots is not None and shots < 1:
        raise ValidationError("shots must be >= 1")
    n = a.n_qubits
    anc = 2 * n
    total = anc + 1
    init = _product_state(np.kron(b.amplitudes, a.amplitudes), total)
    ops = [gate("H", anc)]
    ops += [gate("SWAP", i, n + i, controls=[anc]) for i in range(n)]
    ops.append(gate("H", anc))
    p0 = _ancilla_p0(QuantumCircuit(total, tuple(ops)), init, shots, seed)
    return 2 * p0 - 1


def hadamard_test(U, state: Statevector, part: str = "real", shots: int | None = 1000,
                  seed=None) -> float:
    """Estimate ``Re<psi|U|psi>`` (``part="real"``) or ``Im<psi|U|psi>``."""
    if part not in ("real", "imag", "imaginary"):
        raise ValidationError(f"part must be 'real' or 'imag', got {part!r}")
    if shots is not None and shots < 1:
        raise ValidationError("shots must be >= 1")
    u = _as_circuit(U)
    n = state.n_qubits
    if u.n_qubits != n:
        raise ValidationError("U does not act on the state's register")
    anc = n
    total = n + 1
    ops = [gate("H", anc)]
    if part != "real":
        ops.append(gate("SDG", anc))
    ops += list(controlled_power(u.remap(list(range(n)), total), 1, anc).ops)
    ops.append(gate("H", anc))
    p0 = _ancilla_p0(QuantumCircuit(total, tuple(ops)), _product_state(state.amplitudes, total),
                     shots, seed)
    return 2 * p0 - 1
