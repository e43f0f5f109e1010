"""Matrix-free statevector storage and in-place gate application.

Qubit ``q`` is bit ``q`` of the basis-state integer (qubit 0 is the least
significant bit).  A k-qubit gate matrix acting on ``targets`` uses the same
convention internally: ``targets[0]`` is the least significant bit of the
matrix row/column index.

Gates are applied by viewing the amplitude array as a rank-n tensor of shape
``(2,) * n`` and updating only the slices a gate touches, so no ``2^n x 2^n``
operator is ever built.  The kernels also accept a leading batch axis, which
the trajectory noise simulator uses to advance many trajectories at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapacityError, ValidationError

MAX_QUBITS = 30
NORM_DRIFT_TOL = 1e-10
UNITARY_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class GateMatrix:
    """A validated unitary acting on ``log2(dim)`` qubits."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"gate matrix must be square, got shape {m.shape}")
        dim = m.shape[0]
        if dim < 2 or dim & (dim - 1):
            raise ValidationError(f"gate dimension must be a power of two >= 2, got {dim}")
        # tolerance grows with dim: eigendecomposition round-off accumulates
        err = np.max(np.abs(m.conj().T @ m - np.eye(dim)))
        if not np.isfinite(err) or err > UNITARY_ATOL * max(1, dim):
            raise ValidationError(f"gate matrix is not unitary (max |U^dag U - I| = {err:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def num_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def adjoint(self) -> "GateMatrix":
        return GateMatrix(self.entries.conj().T)


def as_gate(gate) -> np.ndarray:
    """Return the validated complex matrix of ``gate`` (GateMatrix or array)."""
    if isinstance(gate, GateMatrix):
        return gate.entries
    return GateMatrix(gate).entries


@dataclass
class Statevector:
    """An n-qubit pure state plus the classical scale of the data it encodes.

    ``amplitudes`` always has unit 2-norm; ``classical_norm`` restores the
    physical magnitude of an encoded field (``field = classical_norm * amps``).
    Every renormalization triggered by numerical drift is appended to
    ``drift_log`` as ``(op_index, drift)``.
    """

    n_qubits: int
    amplitudes: np.ndarray
    classical_norm: float = 1.0
    drift_log: list = field(default_factory=list)
    _gate_count: int = field(default=0, repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (1 << self.n_qubits,):
            raise ValidationError(
                f"expected {1 << self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {amps.shape}"
            )
        if not self.classical_norm > 0:
            raise ValidationError(f"classical_norm must be > 0, got {self.classical_norm}")
        self.amplitudes = amps

    @classmethod
    def from_vector(cls, data) -> "Statevector":
        """Amplitude-encode ``data`` directly: unit amplitudes plus its norm."""
        v = np.asarray(data, dtype=np.complex128).ravel()
        n = v.size.bit_length() - 1
        if v.size < 2 or v.size != 1 << n:
            raise ValidationError(f"vector length must be a power of two >= 2, got {v.size}")
        nrm = float(np.linalg.norm(v))
        if nrm == 0.0:
            raise ValidationError("cannot encode the all-zero vector")
        return cls(n, v / nrm, nrm)

    def copy(self) -> "Statevector":
        return Statevector(self.n_qubits, self.amplitudes.copy(), self.classical_norm,
                           list(self.drift_log))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def to_field(self) -> np.ndarray:
        """Decode back to physical units (real part if the data were real)."""
        return self.classical_norm * self.amplitudes


def new_zero_state(n_qubits: int) -> Statevector:
    """Return ``|0...0>`` on ``n_qubits`` qubits with ``classical_norm = 1``."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        nbytes = 16 * (1 << max(n_qubits, 0))
        raise CapacityError(
            f"{n_qubits} qubits is outside [1, {MAX_QUBITS}]: a statevector needs "
            f"2^{n_qubits} complex amplitudes ({nbytes:.3e} bytes)"
        )
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(n_qubits, amps)


def _check_qubits(n, targets, controls):
    qubits = list(targets) + list(controls)
    for q in qubits:
        if not 0 <= q < n:
            raise IndexError(f"qubit index {q} out of range for {n} qubits")
    if len(set(qubits)) != len(qubits):
        raise ValidationError(f"targets {tuple(targets)} and controls {tuple(controls)} overlap")


def apply_matrix(amps: np.ndarray, n: int, matrix: np.ndarray,
                 targets: Sequence[int], controls: Sequence[int] = ()) -> None:
    """Apply ``matrix`` to ``targets`` of ``amps`` in place, conditioned on ``controls``.

    ``amps`` has shape ``(..., 2**n)``; leading axes are independent states.
    For single-qubit gates ``matrix`` may also have shape ``(B, 2, 2)`` with
    ``amps`` of shape ``(B, 2**n)``, giving each state its own operator.
    No validation is done here; callers check indices and unitarity.
    """
    batch = amps.shape[:-1]
    nb = len(batch)
    psi = amps.reshape(batch + (2,) * n)
    full_axis = {q: nb + n - 1 - q for q in range(n)}
    idx = [slice(None)] * (nb + n)
    for c in controls:
        idx[full_axis[c]] = 1
    sub = psi[tuple(idx)] if controls else psi
    ctrl_axes = sorted(full_axis[c] for c in controls)

    def sub_axis(q):
        a = full_axis[q]
        return a - sum(1 for ca in ctrl_axes if ca < a)

    k = len(targets)
    if k == 1:
        ax = sub_axis(targets[0])
        lo = [slice(None)] * sub.ndim
        hi = [slice(None)] * sub.ndim
        lo[ax] = 0
        hi[ax] = 1
        lo, hi = tuple(lo), tuple(hi)
        if matrix.ndim == 3:
            # one 2x2 matrix per batch entry
            shape = (-1,) + (1,) * (sub.ndim - 2)
            m00, m01, m10, m11 = (matrix[:, i, j].reshape(shape) for i, j in
                                  ((0, 0), (0, 1), (1, 0), (1, 1)))
            a0 = sub[lo].copy()
            a1 = sub[hi]
            new1 = m10 * a0 + m11 * a1
            sub[lo] = m00 * a0 + m01 * a1
            sub[hi] = new1
            return
        m00, m01, m10, m11 = matrix[0, 0], matrix[0, 1], matrix[1, 0], matrix[1, 1]
        if m01 == 0 and m10 == 0:
            if m00 != 1:
                sub[lo] *= m00
            if m11 != 1:
                sub[hi] *= m11
        elif m00 == 0 and m11 == 0:
            a0 = sub[lo].copy()
            sub[lo] = sub[hi]
            sub[hi] = a0
            if m01 != 1:
                sub[lo] *= m01
            if m10 != 1:
                sub[hi] *= m10
        else:
            # in place with one half-size copy, so peak extra memory is ~1x the state
            # length-1 slices keep these views even when every other axis is indexed away
            lo_v = sub[lo[:ax] + (slice(0, 1),) + lo[ax + 1:]]
            hi_v = sub[hi[:ax] + (slice(1, 2),) + hi[ax + 1:]]
            a0 = lo_v.copy()
            lo_v *= m00
            lo_v += m01 * hi_v
            hi_v *= m11
            a0 *= m10
            hi_v += a0
        return
    # general k-qubit gate: contract over the target axes
    src = [sub_axis(q) for q in reversed(targets)]
    mt = matrix.reshape((2,) * (2 * k))
    res = np.tensordot(mt, sub, axes=(list(range(k, 2 * k)), src))
    sub[...] = np.moveaxis(res, list(range(k)), src)


def _finish(state: Statevector) -> Statevector:
    state._gate_count += 1
    nrm = np.linalg.norm(state.amplitudes)
    drift = abs(nrm - 1.0)
    if drift > NORM_DRIFT_TOL:
        state.drift_log.append((state._gate_count, drift))
        state.amplitudes /= nrm
    return state


def apply_1q(state: Statevector, gate, target: int) -> Statevector:
    """Apply a single-qubit unitary to ``target`` in place and return ``state``."""
    m = as_gate(gate)
    if m.shape != (2, 2):
        raise ValidationError(f"apply_1q needs a 2x2 gate, got {m.shape}")
    _check_qubits(state.n_qubits, [target], [])
    apply_matrix(state.amplitudes, state.n_qubits, m, (target,))
    return _finish(state)


def apply_controlled(state: Statevector, gate, controls: Sequence[int], target) -> Statevector:
    """Apply ``gate`` to ``target`` only where every control bit is 1.

    ``target`` may be a single index or a sequence of indices for a
    multi-qubit gate (``target[0]`` is the least significant gate bit).
    """
    m = as_gate(gate)
    targets = (target,) if np.isscalar(target) else tuple(target)
    if m.shape[0] != 1 << len(targets):
        raise ValidationError(f"{m.shape[0]}x{m.shape[0]} gate does not fit {len(targets)} targets")
    _check_qubits(state.n_qubits, targets, controls)
    apply_matrix(state.amplitudes, state.n_qubits, m, targets, tuple(controls))
    return _finish(state)


def apply_gate(state: Statevector, gate, targets: Sequence[int],
               controls: Sequence[int] = ()) -> Statevector:
    """Apply a k-qubit unitary on ``targets`` (optionally controlled)."""
    return apply_controlled(state, gate, controls, tuple(targets))


def inner_product(a: Statevector, b: Statevector) -> complex:
    """Return ``<a|b>`` of the unit-norm amplitude vectors."""
    if a.n_qubits != b.n_qubits:
        raise ValidationError(f"size mismatch: {a.n_qubits} vs {b.n_qubits} qubits")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a, b) -> float:
    """``|<a|b>|^2`` for two statevectors or two (unnormalized) vectors."""
    va = a.amplitudes if isinstance(a, Statevector) else np.asarray(a, dtype=complex)
    vb = b.amplitudes if isinstance(b, Statevector) else np.asarray(b, dtype=complex)
    den = np.linalg.norm(va) * np.linalg.norm(vb)
    if den == 0:
        raise ValidationError("fidelity undefined for a zero vector")
    return float(abs(np.vdot(va, vb)) ** 2 / den**2)
