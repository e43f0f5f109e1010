"""Quantum circuits as ordered gate lists: build, transform, meter, execute.

Circuits are immutable values.  Builders return new circuits; the executor
only mutates the private :class:`~qcfd.statevec.Statevector` it is handed.

Text format
-----------
One op per line, blank lines and ``#`` comments ignored::

    QUBITS 3
    H 0
    X 1 c=0
    RY 2 c=0,1 p=0.7853981633974483 d=3.5e-08
    UNITARY 0,1 p=<re00>,<im00>,<re01>,...

Fields after the kind are the comma separated targets, then optional
``c=`` controls, ``p=`` parameters and ``d=`` duration in seconds.  Floats are
written with ``repr`` so :func:`loads` reproduces the circuit bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .statevec import Statevector, apply_matrix, as_gate, _finish

DEFAULT_1Q_DURATION = 35e-9
DEFAULT_2Q_DURATION = 300e-9

_SQ2 = 1 / np.sqrt(2)
_FIXED = {
    "I": np.eye(2, dtype=complex),
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
    "TDG": np.array([[1, 0], [0, np.exp(-1j * np.pi / 4)]], dtype=complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}
for _m in _FIXED.values():
    _m.setflags(write=False)

ROTATIONS = ("RX", "RY", "RZ", "P", "GPHASE")
_SELF_INVERSE = ("I", "H", "X", "Y", "Z", "SWAP")
_INVERSE_PAIRS = {"S": "SDG", "SDG": "S", "T": "TDG", "TDG": "T"}
_N_TARGETS = {"SWAP": 2}
KINDS = frozenset(_FIXED) | set(ROTATIONS) | {"UNITARY", "DELAY", "MEASURE"}


def rotation_matrix(kind: str, theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]])
    if kind == "P":
        return np.array([[1, 0], [0, np.exp(1j * theta)]])
    if kind == "GPHASE":
        return np.exp(1j * theta) * np.eye(2)
    raise ValidationError(f"{kind} is not a rotation")


@dataclass(eq=False)
class CircuitOp:
    """One gate application.

    ``kind`` is one of :data:`KINDS`.  ``params`` holds angles in radians for
    rotations, the delay in seconds for ``DELAY``, and nothing otherwise.
    ``UNITARY`` carries an explicit ``matrix`` on ``len(targets)`` qubits.
    ``duration`` of ``None`` means "use the default for this gate size".
    """

    kind: str
    targets: tuple
    controls: tuple = ()
    params: tuple = ()
    duration: float | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.kind = self.kind.upper()
        self.targets = tuple(int(q) for q in self.targets)
        self.controls = tuple(int(q) for q in self.controls)
        self.params = tuple(float(p) for p in self.params)
        if self.kind not in KINDS:
            raise ValidationError(f"unknown gate kind {self.kind!r}")
        if not self.targets:
            raise ValidationError(f"{self.kind} needs at least one target")
        qubits = self.targets + self.controls
        if len(set(qubits)) != len(qubits) or min(qubits) < 0:
            raise ValidationError(f"invalid or overlapping qubits in {self.kind} {qubits}")
        if any(not np.isfinite(p) for p in self.params):
            raise ValidationError(f"{self.kind} has a non-finite parameter {self.params}")
        if self.kind in ROTATIONS and len(self.params) != 1:
            raise ValidationError(f"{self.kind} takes exactly one angle")
        if self.duration is not None:
            self.duration = float(self.duration)
            if not self.duration >= 0:
                raise ValidationError(f"duration must be >= 0, got {self.duration}")
        want = _N_TARGETS.get(self.kind, 1)
        if self.kind == "UNITARY":
            if self.matrix is None:
                raise ValidationError("UNITARY op needs a matrix")
            self.matrix = as_gate(self.matrix)
            if self.matrix.shape[0] != 1 << len(self.targets):
                raise ValidationError("UNITARY matrix size does not match its targets")
        elif self.kind not in ("DELAY", "MEASURE") and len(self.targets) != want:
            raise ValidationError(f"{self.kind} acts on {want} target(s), got {self.targets}")

    @property
    def qubits(self) -> tuple:
        return self.targets + self.controls

    @property
    def is_gate(self) -> bool:
        return self.kind not in ("DELAY", "MEASURE")

    def gate_matrix(self) -> np.ndarray:
        if self.kind in _FIXED:
            return _FIXED[self.kind]
        if self.kind in ROTATIONS:
            return rotation_matrix(self.kind, self.params[0])
        if self.kind == "UNITARY":
            return self.matrix
        raise ValidationError(f"{self.kind} has no gate matrix")

    def default_duration(self) -> float:
        if self.kind == "DELAY":
            return self.params[0] if self.params else 0.0
        if self.kind == "MEASURE":
            return 0.0
        return DEFAULT_1Q_DURATION if len(self.qubits) == 1 else DEFAULT_2Q_DURATION

    @property
    def time(self) -> float:
        return self.default_duration() if self.duration is None else self.duration

    def replace(self, **changes) -> "CircuitOp":
        kw = dict(kind=self.kind, targets=self.targets, controls=self.controls,
                  params=self.params, duration=self.duration, matrix=self.matrix)
        kw.update(changes)
        return CircuitOp(**kw)

    def adjoint(self) -> "CircuitOp":
        if self.kind == "MEASURE":
            raise ValidationError("cannot take the adjoint of a measurement")
        if self.kind in _SELF_INVERSE or self.kind == "DELAY":
            return self
        if self.kind in _INVERSE_PAIRS:
            return self.replace(kind=_INVERSE_PAIRS[self.kind])
        if self.kind in ROTATIONS:
            return self.replace(params=(-self.params[0],))
        return self.replace(matrix=self.matrix.conj().T)

    def __eq__(self, other):
        if not isinstance(other, CircuitOp):
            return NotImplemented
        same = (self.kind, self.targets, self.controls, self.params, self.duration) == (
            other.kind, other.targets, other.controls, other.params, other.duration)
        if not same:
            return False
        if self.matrix is None or other.matrix is None:
            return self.matrix is other.matrix
        return np.array_equal(self.matrix, other.matrix)


def gate(kind: str, *targets: int, controls: Sequence[int] = (), params: Sequence[float] = (),
         duration: float | None = None) -> CircuitOp:
    """Shorthand constructor: ``gate("RY", 0, params=[0.3])``."""
    return CircuitOp(kind, targets, tuple(controls), tuple(params), duration)


@dataclass(frozen=True)
class CircuitMetrics:
    width: int
    depth: int
    one_q_gates: int
    two_q_gates: int
    multi_q_gates: int
    total_duration: float

    @property
    def gate_count(self) -> int:
        return self.one_q_gates + self.two_q_gates + self.multi_q_gates


@dataclass(frozen=True)
class QuantumCircuit:
    n_qubits: int
    ops: tuple = ()

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValidationError(f"circuit needs at least one qubit, got {self.n_qubits}")
        ops = tuple(self.ops)
        for op in ops:
            _check_op(op, self.n_qubits)
        object.__setattr__(self, "ops", ops)

    def __len__(self):
        return len(self.ops)

    def __add__(self, other: "QuantumCircuit") -> "QuantumCircuit":
        """``a + b`` runs ``a`` first, then ``b``."""
        if other.n_qubits != self.n_qubits:
            raise ValidationError("cannot concatenate circuits of different widths")
        return QuantumCircuit(self.n_qubits, self.ops + other.ops)

    def append(self, op: CircuitOp) -> "QuantumCircuit":
        return append_gate(self, op)

    def extend(self, ops: Iterable[CircuitOp]) -> "QuantumCircuit":
        return QuantumCircuit(self.n_qubits, self.ops + tuple(ops))

    def remap(self, qubit_map: Sequence[int], n_qubits: int) -> "QuantumCircuit":
        """Relabel qubit ``q`` as ``qubit_map[q]`` inside an ``n_qubits`` register."""
        if len(qubit_map) != self.n_qubits:
            raise ValidationError("qubit_map must name a destination for every qubit")
        out = [op.replace(targets=tuple(qubit_map[q] for q in op.targets),
                          controls=tuple(qubit_map[q] for q in op.controls))
               for op in self.ops]
        return QuantumCircuit(n_qubits, tuple(out))

    def metrics(self) -> CircuitMetrics:
        return metrics(self)


def _check_op(op: CircuitOp, n: int):
    for q in op.qubits:
        if q >= n:
            raise ValidationError(f"{op.kind} touches qubit {q} but the circuit has {n} qubits")


def append_gate(circuit: QuantumCircuit, op: CircuitOp) -> QuantumCircuit:
    _check_op(op, circuit.n_qubits)
    return QuantumCircuit(circuit.n_qubits, circuit.ops + (op,))


def adjoint(circuit: QuantumCircuit) -> QuantumCircuit:
    """Reverse the op order and conjugate-transpose every gate."""
    return QuantumCircuit(circuit.n_qubits, tuple(op.adjoint() for op in reversed(circuit.ops)))


def controlled_power(circuit: QuantumCircuit, power: int, control) -> QuantumCircuit:
    """Repeat ``circuit`` ``power`` times with every gate conditioned on ``control``.

    ``control`` may be one qubit or a sequence of qubits; all must already be
    inside ``circuit.n_qubits`` and disjoint from the qubits the gates touch.
    Delays are kept unconditioned.
    """
    if int(power) != power or power < 1:
        raise ValidationError(f"power must be an integer >= 1, got {power}")
    ctrl = (int(control),) if np.isscalar(control) else tuple(int(c) for c in control)
    body = []
    for op in circuit.ops:
        if op.kind == "MEASURE":
            raise ValidationError("cannot control a measurement")
        if op.kind == "DELAY":
            body.append(op)
            continue
        if set(ctrl) & set(op.qubits):
            raise ValidationError(f"control {ctrl} overlaps {op.kind} on {op.qubits}")
        body.append(op.replace(controls=op.controls + ctrl, duration=op.duration))
    return QuantumCircuit(circuit.n_qubits, tuple(body) * int(power))


def metrics(circuit: QuantumCircuit) -> CircuitMetrics:
    """Width, greedy layer depth, gate counts and critical-path duration.

    A gate joins the earliest layer after every layer that already uses one of
    its qubits.  Delays and measurement tags do not count as gates but delays
    do add to the duration.
    """
    level = [0] * circuit.n_qubits
    clock = [0.0] * circuit.n_qubits
    counts = {1: 0, 2: 0, 3: 0}
    for op in circuit.ops:
        qs = op.qubits
        start = max(clock[q] for q in qs)
        for q in qs:
            clock[q] = start + op.time
        if not op.is_gate:
            continue
        layer = max(level[q] for q in qs) + 1
        for q in qs:
            level[q] = layer
        counts[min(len(qs), 3)] += 1
    return CircuitMetrics(
        width=circuit.n_qubits,
        depth=max(level),
        one_q_gates=counts[1],
        two_q_gates=counts[2],
        multi_q_gates=counts[3],
        total_duration=max(clock),
    )


def apply_op(state: Statevector, op: CircuitOp) -> Statevector:
    if op.is_gate:
        apply_matrix(state.amplitudes, state.n_qubits, op.gate_matrix(), op.targets, op.controls)
        _finish(state)
    return state


def execute(circuit: QuantumCircuit, state: Statevector, copy: bool = True) -> Statevector:
    """Run ``circuit`` noiselessly on ``state``.

    Measurement tags are markers only; sampling happens in
    :mod:`qcfd.noise`.  The input is left untouched unless ``copy=False``.
    """
    if state.n_qubits != circuit.n_qubits:
        raise ValidationError(
            f"circuit has {circuit.n_qubits} qubits but the state has {state.n_qubits}")
    out = state.copy() if copy else state
    for op in circuit.ops:
        apply_op(out, op)
    return out


def unitary(circuit: QuantumCircuit) -> np.ndarray:
    """Dense unitary of ``circuit`` built column by column (small circuits only)."""
    from .statevec import new_zero_state

    dim = 1 << circuit.n_qubits
    cols = np.empty((dim, dim), dtype=complex)
    for j in range(dim):
        s = new_zero_state(circuit.n_qubits)
        s.amplitudes[:] = 0
        s.amplitudes[j] = 1
        cols[:, j] = execute(circuit, s, copy=False).amplitudes
    return cols


# -- text serialization ------------------------------------------------------

def _fmt_ints(xs):
    return ",".join(str(x) for x in xs)


def dumps(circuit: QuantumCircuit) -> str:
    lines = [f"QUBITS {circuit.n_qubits}"]
    for op in circuit.ops:
        parts = [op.kind, _fmt_ints(op.targets)]
        if op.controls:
            parts.append("c=" + _fmt_ints(op.controls))
        params = list(op.params)
        if op.kind == "UNITARY":
            flat = op.matrix.ravel()
            params = [v for z in flat for v in (z.real, z.imag)]
        if params:
            parts.append("p=" + ",".join(repr(float(p)) for p in params))
        if op.duration is not None:
            parts.append("d=" + repr(op.duration))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def loads(text: str) -> QuantumCircuit:
    n = None
    ops = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "QUBITS":
            n = int(fields[1])
            continue
        if len(fields) < 2:
            raise ValidationError(f"line {lineno}: expected 'KIND targets ...'")
        kind, targets = fields[0], [int(t) for t in fields[1].split(",")]
        controls, params, duration = [], [], None
        for f in fields[2:]:
            key, _, val = f.partition("=")
            if key == "c":
                controls = [int(v) for v in val.split(",")]
            elif key == "p":
                params = [float(v) for v in val.split(",")]
            elif key == "d":
                duration = float(val)
            else:
                raise ValidationError(f"line {lineno}: unknown field {f!r}")
        matrix = None
        if kind.upper() == "UNITARY":
            vals = np.array(params)
            dim = 1 << len(targets)
            matrix = np.empty(dim * dim, dtype=complex)
            matrix.real = vals[0::2]
            matrix.imag = vals[1::2]
            matrix = matrix.reshape(dim, dim)
            params = []
        ops.append(CircuitOp(kind, tuple(targets), tuple(controls), tuple(params), duration, matrix))
    if n is None:
        raise ValidationError("missing 'QUBITS n' header")
    return QuantumCircuit(n, tuple(ops))
