"""Shot sampling, trajectory noise simulation and Richardson extrapolation.

Noise is simulated with stochastic quantum trajectories on statevectors
rather than density matrices.  Each trajectory is a pure state; averages over
many trajectories converge to the corresponding channel average while memory
stays at ``O(2^n)`` per trajectory.  Trajectories are advanced in batches of
independent rows so that large ensembles stay cheap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import CircuitOp, QuantumCircuit, ROTATIONS
from .errors import ValidationError
from .statevec import Statevector, apply_matrix, new_zero_state

# single-qubit Paulis used for stochastic gate errors
_PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)
_EYE = np.eye(2, dtype=complex)
# axis of the small residual rotation used for coherent over-rotation
_OVERROTATION_AXIS = {"RX": "RX", "X": "RX", "RY": "RY", "Y": "RY",
                      "RZ": "RZ", "Z": "RZ", "P": "RZ"}

MAX_BATCH_AMPLITUDES = 1 << 22


@dataclass(frozen=True)
class NoiseModel:
    """Device imperfections: times in seconds, rates are probabilities.

    ``T1``/``T2`` may be ``math.inf`` to switch relaxation/dephasing off.
    """

    T1: float = math.inf
    T2: float = math.inf
    gate_error_rate: float = 0.0
    overrotation_sigma: float = 0.0
    readout_error: float = 0.0

    def __post_init__(self):
        if not (self.T1 > 0 and self.T2 > 0):
            raise ValidationError(f"T1 and T2 must be > 0, got {self.T1}, {self.T2}")
        if self.T2 > 2 * self.T1:
            raise ValidationError(
                f"T2 = {self.T2} exceeds 2*T1 = {2 * self.T1}: unphysical")
        for name in ("gate_error_rate", "readout_error"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if not self.overrotation_sigma >= 0:
            raise ValidationError("overrotation_sigma must be >= 0")

    @property
    def dephasing_time(self) -> float:
        """Pure-dephasing time from ``1/T_phi = 1/T2 - 1/(2 T1)``."""
        rate = 1 / self.T2 - 1 / (2 * self.T1)
        return math.inf if rate <= 0 else 1 / rate

    @property
    def is_ideal(self) -> bool:
        return (math.isinf(self.T1) and math.isinf(self.T2) and self.gate_error_rate == 0
                and self.overrotation_sigma == 0 and self.readout_error == 0)

    @classmethod
    def preset(cls, name: str) -> "NoiseModel":
        try:
            return cls(**PRESETS[name])
        except KeyError:
            raise ValidationError(f"unknown noise preset {name!r}; known: {sorted(PRESETS)}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("T1", "T2", "gate_error_rate", "overrotation_sigma", "readout_error")}


# IBM Sherbrooke medians (June 2024) and a typical 1e-3 gate error rate
PRESETS = {
    "ideal": {},
    "sherbrooke-2024": {"T1": 275.72e-6, "T2": 160.63e-6, "gate_error_rate": 1e-3},
}


@dataclass
class ShotHistogram:
    n_qubits: int
    counts: dict = field(default_factory=dict)
    total_shots: int = 0

    def __post_init__(self):
        self.counts = {int(k): int(v) for k, v in self.counts.items() if v}
        if any(v < 0 for v in self.counts.values()):
            raise ValidationError("counts must be nonnegative")
        if any(not 0 <= k < 1 << self.n_qubits for k in self.counts):
            raise ValidationError("basis index out of range")
        if sum(self.counts.values()) != self.total_shots:
            raise ValidationError(
                f"counts sum to {sum(self.counts.values())}, expected {self.total_shots}")

    @classmethod
    def from_array(cls, n_qubits: int, counts: np.ndarray) -> "ShotHistogram":
        nz = np.flatnonzero(counts)
        return cls(n_qubits, {int(i): int(counts[i]) for i in nz}, int(counts.sum()))

    def to_array(self) -> np.ndarray:
        out = np.zeros(1 << self.n_qubits, dtype=np.int64)
        for k, v in self.counts.items():
            out[k] = v
        return out

    def __add__(self, other: "ShotHistogram") -> "ShotHistogram":
        if other.n_qubits != self.n_qubits:
            raise ValidationError("cannot merge histograms of different widths")
        merged = dict(self.counts)
        for k, v in other.counts.items():
            merged[k] = merged.get(k, 0) + v
        return ShotHistogram(self.n_qubits, merged, self.total_shots + other.total_shots)

    def marginal(self, qubits: Sequence[int]) -> "ShotHistogram":
        """Counts over ``qubits`` only; ``qubits[0]`` becomes bit 0."""
        out = {}
        for k, v in self.counts.items():
            key = sum(((k >> q) & 1) << i for i, q in enumerate(qubits))
            out[key] = out.get(key, 0) + v
        return ShotHistogram(len(qubits), out, self.total_shots)

    def probability(self, index: int) -> float:
        return self.counts.get(index, 0) / self.total_shots

    # bitstrings are written with qubit n-1 leftmost, qubit 0 rightmost
    def bitstring(self, index: int) -> str:
        return format(index, f"0{self.n_qubits}b")

    def to_json(self) -> str:
        counts = {self.bitstring(k): self.counts[k] for k in sorted(self.counts)}
        return json.dumps({"n_qubits": self.n_qubits, "total_shots": self.total_shots,
                           "counts": counts}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ShotHistogram":
        d = json.loads(text)
        n = int(d["n_qubits"])
        counts = {}
        for bits, v in d["counts"].items():
            if len(bits) != n or set(bits) - {"0", "1"}:
                raise ValidationError(f"bad bitstring {bits!r} for {n} qubits")
            counts[int(bits, 2)] = int(v)
        return cls(n, counts, int(d["total_shots"]))


@dataclass(frozen=True)
class BlochAngles:
    """``e^{i b1} [cos b2 |0> + e^{i b3} sin b2 |1>]``."""

    beta1: float
    beta2: float
    beta3: float

    @classmethod
    def from_state(cls, state) -> "BlochAngles":
        a = state.amplitudes if isinstance(state, Statevector) else np.asarray(state, complex)
        if a.shape != (2,):
            raise ValidationError("Bloch angles need a single-qubit state")
        a = a / np.linalg.norm(a)
        beta2 = math.atan2(abs(a[1]), abs(a[0]))
        if abs(a[0]) > 0:
            beta1 = float(np.angle(a[0]))
            beta3 = float(np.angle(a[1])) - beta1 if abs(a[1]) > 0 else 0.0
        else:
            beta1, beta3 = float(np.angle(a[1])), 0.0
        return cls(beta1, beta2, beta3)

    def amplitudes(self) -> np.ndarray:
        return np.exp(1j * self.beta1) * np.array(
            [math.cos(self.beta2), np.exp(1j * self.beta3) * math.sin(self.beta2)])


# -- sampling and estimation -------------------------------------------------

def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_shots(state: Statevector, shots: int, seed=None,
                 readout_error: float = 0.0) -> ShotHistogram:
    """Draw ``shots`` i.i.d. computational-basis outcomes from ``state``.

    With ``readout_error > 0`` every measured bit is flipped independently with
    that probability.
    """
    if int(shots) != shots or shots < 1:
        raise ValidationError(f"shots must be a positive integer, got {shots}")
    rng = _rng(seed)
    p = np.abs(state.amplitudes) ** 2
    p /= p.sum()
    if readout_error == 0:
        counts = rng.multinomial(int(shots), p)
        return ShotHistogram.from_array(state.n_qubits, counts)
    outcomes = rng.choice(p.size, size=int(shots), p=p)
    flips = rng.random((int(shots), state.n_qubits)) < readout_error
    outcomes ^= (flips * (1 << np.arange(state.n_qubits))).sum(axis=1)
    return ShotHistogram.from_array(state.n_qubits, np.bincount(outcomes, minlength=p.size))


def estimate_probabilities(hist: ShotHistogram) -> tuple[np.ndarray, np.ndarray]:
    """Empirical probabilities and their binomial standard errors."""
    if hist.total_shots < 1:
        raise ValidationError("histogram has no shots")
    p = hist.to_array() / hist.total_shots
    return p, np.sqrt(p * (1 - p) / hist.total_shots)


def expectation_diagonal(hist: ShotHistogram, values) -> tuple[float, float]:
    """Estimate ``sum_i p_i values_i`` and its standard error."""
    values = np.asarray(values, dtype=float)
    if values.shape != (1 << hist.n_qubits,):
        raise ValidationError(
            f"need {1 << hist.n_qubits} values, got shape {values.shape}")
    p, _ = estimate_probabilities(hist)
    mean = float(p @ values)
    var = max(float(p @ values**2) - mean**2, 0.0)
    return mean, math.sqrt(var / hist.total_shots)


# -- trajectory simulation ---------------------------------------------------

def _batched(mats_true, mats_false, mask):
    return np.where(mask[:, None, None], mats_true, mats_false)


def _renormalize(amps):
    amps /= np.linalg.norm(amps, axis=1, keepdims=True)


def _excited_population(amps, n, q):
    psi = amps.reshape((amps.shape[0],) + (2,) * n)
    idx = [slice(None)] * (n + 1)
    idx[n - q] = 1
    return np.sum(np.abs(psi[tuple(idx)]) ** 2, axis=tuple(range(1, n)))


def _noisy_op(amps, n, op: CircuitOp, noise: NoiseModel, rng):
    batch = amps.shape[0]
    qubits = op.qubits
    if op.is_gate:
        apply_matrix(amps, n, op.gate_matrix(), op.targets, op.controls)
        axis = _OVERROTATION_AXIS.get(op.kind)
        if axis and noise.overrotation_sigma > 0:
            from .circuit import rotation_matrix
            deltas = rng.normal(0.0, noise.overrotation_sigma, batch)
            mats = np.stack([rotation_matrix(axis, d) for d in deltas])
            apply_matrix(amps, n, mats, op.targets, op.controls)
    dt = op.time
    if dt > 0 and math.isfinite(noise.T1):
        gamma = -math.expm1(-dt / noise.T1)
        jump = np.array([[0, 1], [0, 0]], dtype=complex)
        keep = np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex)
        for q in qubits:
            p1 = _excited_population(amps, n, q)
            mask = rng.random(batch) < gamma * p1
            apply_matrix(amps, n, _batched(jump, keep, mask), (q,))
            _renormalize(amps)
    t_phi = noise.dephasing_time
    if dt > 0 and math.isfinite(t_phi):
        p_z = -0.5 * math.expm1(-dt / t_phi)
        for q in qubits:
            mask = rng.random(batch) < p_z
            if mask.any():
                apply_matrix(amps, n, _batched(_PAULI[2], _EYE, mask), (q,))
    if op.is_gate and noise.gate_error_rate > 0:
        mask = rng.random(batch) < noise.gate_error_rate
        for q in qubits:
            which = rng.integers(0, 3, batch)
            if mask.any():
                apply_matrix(amps, n, _batched(_PAULI[which], _EYE, mask), (q,))


def run_trajectories(circuit: QuantumCircuit, noise: NoiseModel, trajectories: int,
                     seed=None, state: Statevector | None = None) -> np.ndarray:
    """Final amplitudes of ``trajectories`` independent noisy runs, one per row."""
    if trajectories < 1:
        raise ValidationError("need at least one trajectory")
    rng = _rng(seed)
    n = circuit.n_qubits
    init = (state or new_zero_state(n)).amplitudes
    if init.shape != (1 << n,):
        raise ValidationError("initial state does not match the circuit width")
    chunk = max(1, MAX_BATCH_AMPLITUDES >> n)
    out = np.empty((trajectories, 1 << n), dtype=complex)
    for start in range(0, trajectories, chunk):
        stop = min(start + chunk, trajectories)
        amps = np.tile(init, (stop - start, 1))
        for op in circuit.ops:
            _noisy_op(amps, n, op, noise, rng)
        out[start:stop] = amps
    return out


def noisy_execute(circuit: QuantumCircuit, noise: NoiseModel, seed=None,
                  state: Statevector | None = None) -> Statevector:
    """One stochastic trajectory of ``circuit`` under ``noise``.

    Per op: the ideal gate, a coherent over-rotation for rotation-type gates,
    amplitude-damping jumps on every touched qubit, pure-dephasing ``Z``
    flips, and with probability ``gate_error_rate`` a random Pauli on every
    touched qubit.  The same seed always gives the same state.
    """
    amps = run_trajectories(circuit, noise, 1, seed, state)[0]
    cn = state.classical_norm if state is not None else 1.0
    return Statevector(circuit.n_qubits, amps, cn)


def noisy_probabilities(circuit: QuantumCircuit, noise: NoiseModel, trajectories: int,
                        seed=None, state: Statevector | None = None):
    """Trajectory-averaged outcome probabilities and their standard errors."""
    probs = np.abs(run_trajectories(circuit, noise, trajectories, seed, state)) ** 2
    se = probs.std(axis=0, ddof=1) / math.sqrt(trajectories) if trajectories > 1 else \
        np.zeros(probs.shape[1])
    return probs.mean(axis=0), se


def noisy_shots(circuit: QuantumCircuit, noise: NoiseModel, shots: int,
                seed=None, state: Statevector | None = None) -> ShotHistogram:
    """Hardware-style histogram: one fresh noisy trajectory per shot."""
    rng = _rng(seed)
    amps = run_trajectories(circuit, noise, shots, rng, state)
    p = np.abs(amps) ** 2
    p /= p.sum(axis=1, keepdims=True)
    u = rng.random((shots, 1))
    outcomes = np.minimum((np.cumsum(p, axis=1) < u).sum(axis=1), p.shape[1] - 1)
    if noise.readout_error > 0:
        n = circuit.n_qubits
        flips = rng.random((shots, n)) < noise.readout_error
        outcomes ^= (flips * (1 << np.arange(n))).sum(axis=1)
    return ShotHistogram.from_array(circuit.n_qubits, np.bincount(outcomes, minlength=p.shape[1]))


# -- error mitigation ------------------------------------------------------------

def noise_scaled_circuit(circuit: QuantumCircuit, scale: int) -> QuantumCircuit:
    """Fold every gate ``G`` into ``G (G^dag G)^((c-1)/2)``.

    The ideal action is unchanged while gate count, duration and error
    exposure grow ``c``-fold.  Delays are stretched by ``c``.
    """
    if int(scale) != scale or scale < 1 or scale % 2 == 0:
        raise ValidationError(f"noise scale must be an odd integer >= 1, got {scale}")
    reps = (int(scale) - 1) // 2
    ops = []
    for op in circuit.ops:
        if op.kind == "DELAY":
            ops.append(op.replace(params=(op.time * scale,), duration=None))
            continue
        ops.append(op)
        if op.is_gate:
            inv = op.adjoint()
            ops.extend([inv, op] * reps)
    return QuantumCircuit(circuit.n_qubits, tuple(ops))


def _lagrange_at_zero(nodes, values) -> float:
    total = 0.0
    for i, (ci, vi) in enumerate(zip(nodes, values)):
        w = 1.0
        for j, cj in enumerate(nodes):
            if j != i:
                w *= cj / (cj - ci)
        total += w * vi
    return total


def richardson_extrapolate(points) -> float:
    """Extrapolate ``(scale, value)`` pairs to zero noise with the interpolating polynomial."""
    pts = [(float(c), float(v)) for c, v in points]
    if len(pts) < 2:
        raise ValidationError("need at least two noise scales")
    scales = [c for c, _ in pts]
    if len(set(scales)) != len(scales):
        raise ValidationError(f"duplicate noise scales {scales}")
    if min(scales) < 1:
        raise ValidationError("noise scales must be >= 1")
    return _lagrange_at_zero(scales, [v for _, v in pts])


def shot_extrapolate(points) -> float:
    """Richardson extrapolation in ``1/shots`` towards infinitely many shots.

    ``points`` are ``(shots, estimate)`` pairs.  Useful for estimators whose
    bias is a power series in ``1/Ns`` (e.g. squared amplitudes); the mean of
    an unbiased estimator is left unchanged.
    """
    pts = [(int(n), float(v)) for n, v in points]
    if len(pts) < 2:
        raise ValidationError("need at least two shot counts")
    shots = [n for n, _ in pts]
    if len(set(shots)) != len(shots) or min(shots) < 1:
        raise ValidationError(f"shot counts must be distinct positive integers, got {shots}")
    return _lagrange_at_zero([1.0 / n for n in shots], [v for _, v in pts])


def mitigated_expectation(circuit: QuantumCircuit, values, noise: NoiseModel,
                          scales: Sequence[int] = (1, 3), trajectories: int = 10_000,
                          seed=None, state: Statevector | None = None):
    """Zero-noise estimate of a diagonal observable via gate folding.

    Returns ``(extrapolated, [(scale, estimate), ...])``.  Each scale uses its
    own child seed so estimates are independent.
    """
    values = np.asarray(values, dtype=float)
    children = _rng(seed).spawn(len(scales))
    points = []
    for c, rng in zip(scales, children):
        p, _ = noisy_probabilities(noise_scaled_circuit(circuit, c), noise, trajectories,
                                   rng, state)
        points.append((c, float(p @ values)))
    return richardson_extrapolate(points), points
