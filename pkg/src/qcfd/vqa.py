"""Variational time marching for the advection-diffusion step.

Each step fits ``s * |psi(theta)>`` to the next field by minimizing the
residual of one time step.  ``s`` is a classical scale appended to the
circuit angles because the ansatz only emits unit states.

Parameter vector layout: ``[theta_0, ..., theta_{P-1}, s]`` where the angles
are layer-major, qubit-minor (``theta[l * n + q]`` is the ``Ry`` on qubit
``q`` in rotation column ``l``).
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.optimize

from .algorithms import amplitude_encode, hadamard_test
from .circuit import QuantumCircuit, adjoint, gate
from .errors import OptimizationError, ValidationError
from .flow import FlowProblem, StepOperator, classical_march, discretize, step_lcu
from .statevec import Statevector, apply_matrix, fidelity, new_zero_state

_CNOT_X = np.array([[0, 1], [1, 0]], dtype=float)


@dataclass(frozen=True)
class Ansatz:
    """Hardware-efficient ansatz: an ``Ry`` column, then ``layers`` x (CNOT chain, ``Ry`` column)."""

    n_qubits: int
    layers: int

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValidationError("ansatz needs at least one qubit")
        if self.layers < 0:
            raise ValidationError("layers must be >= 0")

    @property
    def parameter_count(self) -> int:
        return self.n_qubits * (self.layers + 1)

    def circuit(self, theta) -> QuantumCircuit:
        theta = self._check(theta)
        n = self.n_qubits
        ops = [gate("RY", q, params=[theta[q]]) for q in range(n)]
        for layer in range(1, self.layers + 1):
            ops += [gate("X", q + 1, controls=[q]) for q in range(n - 1)]
            ops += [gate("RY", q, params=[theta[layer * n + q]]) for q in range(n)]
        return QuantumCircuit(n, tuple(ops))

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.parameter_count,):
            raise ValidationError(
                f"expected {self.parameter_count} angles, got shape {theta.shape}")
        return theta


def build_ansatz(n_qubits: int, layers: int) -> Ansatz:
    return Ansatz(n_qubits, layers)


def _real_amplitudes(ansatz: Ansatz, theta: np.ndarray) -> np.ndarray:
    # same gate sequence as Ansatz.circuit on a real buffer; Ry and CNOT are real
    n = ansatz.n_qubits
    psi = np.zeros(1 << n)
    psi[0] = 1.0

    def ry_column(col):
        for q in range(n):
            t = theta[col * n + q]
            c, s = math.cos(t / 2), math.sin(t / 2)
            apply_matrix(psi, n, np.array([[c, -s], [s, c]]), (q,))

    ry_column(0)
    for layer in range(1, ansatz.layers + 1):
        for q in range(n - 1):
            apply_matrix(psi, n, _CNOT_X, (q + 1,), (q,))
        ry_column(layer)
    return psi


def ansatz_state(ansatz: Ansatz, theta) -> Statevector:
    """Run the ansatz circuit on ``|0...0>``; amplitudes are real."""
    theta = ansatz._check(theta)
    return Statevector(ansatz.n_qubits, _real_amplitudes(ansatz, theta).astype(complex))


# -- cost -----------------------------------------------------------------------------

def _split(ansatz: Ansatz, params):
    params = np.asarray(params, dtype=float)
    if params.shape != (ansatz.parameter_count + 1,):
        raise ValidationError(
            f"expected {ansatz.parameter_count} angles plus one scale, got shape {params.shape}")
    return params[:-1], params[-1]


def _field(u_prev) -> np.ndarray:
    if isinstance(u_prev, Statevector):
        return u_prev.classical_norm * u_prev.amplitudes.real
    return np.asarray(u_prev, dtype=float)


def evaluate_cost(params, ansatz: Ansatz, op: StepOperator, u_prev, shots: int | None = None,
                  seed=None) -> float:
    """One-step residual.

    explicit: ``|| s psi - Mt u ||^2``; implicit: ``|| M s psi - u ||^2``.
    With ``shots`` the overlaps are estimated with Hadamard tests on the
    step operator's LCU terms, ``shots`` samples each.
    """
    theta, s = _split(ansatz, params)
    u = _field(u_prev)
    if u.shape != (1 << ansatz.n_qubits,) or op.matrix.shape[0] != u.size:
        raise ValidationError("ansatz, operator and field sizes do not match")
    if shots is None:
        psi = _real_amplitudes(ansatz, theta)
        if op.scheme == "explicit":
            r = s * psi - op.matrix @ u
        else:
            r = op.matrix @ (s * psi) - u
        return float(r @ r)
    # a squared norm; sampling noise can push the estimate slightly negative
    return max(_shots_cost(theta, s, ansatz, op, u, shots, seed), 0.0)


def _shots_cost(theta, s, ansatz, op, u, shots, seed):
    decomp = step_lcu(op)
    terms = decomp.terms
    unorm = float(np.linalg.norm(u))
    n = ansatz.n_qubits
    zero = new_zero_state(n)
    v_psi = ansatz.circuit(theta)
    v_u, _ = amplitude_encode(u)
    rngs = iter(np.random.default_rng(seed).spawn(len(terms) ** 2 + len(terms)))

    def re_overlap(left: QuantumCircuit, middle: QuantumCircuit, right: QuantumCircuit):
        # Re <0| left^dag middle right |0>
        return hadamard_test(right + middle + adjoint(left), zero, "real", shots, next(rngs))

    # || sum_i a_i U_i |phi> ||^2 with the diagonal terms known exactly
    def gram(phi: QuantumCircuit):
        total = sum(a * a for a, _ in terms)
        for i in range(len(terms)):
            for j in range(i + 1, len(terms)):
                ai, ui = terms[i]
                aj, uj = terms[j]
                total += 2 * ai * aj * re_overlap(phi + ui, uj, phi)
        return total

    if op.scheme == "explicit":
        cross = sum(a * re_overlap(v_psi, ui, v_u) for a, ui in terms)
        return float(s * s - 2 * s * unorm * cross + unorm**2 * gram(v_u))
    cross = sum(a * re_overlap(v_u, ui, v_psi) for a, ui in terms)
    return float(s * s * gram(v_psi) - 2 * s * unorm * cross + unorm**2)


# -- optimizer --------------------------------------------------------------------------

@dataclass
class OptimizerConfig:
    method: str = "nelder-mead"
    max_iters: int = 2000
    cost_tolerance: float = 1e-12
    parameter_tolerance: float = 1e-10
    fd_step: float = 1e-4
    initial_step: float = 0.002
    restart_every: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("nelder-mead", "finite-difference-gradient"):
            raise ValidationError(f"unknown optimizer {self.method!r}")
        if not (self.cost_tolerance > 0 and self.parameter_tolerance > 0 and self.fd_step > 0):
            raise ValidationError("tolerances and fd_step must be > 0")


@dataclass
class OptimizationTrace:
    costs: list = field(default_factory=list)
    params: np.ndarray | None = None
    converged: bool = False
    iterations: int = 0
    evaluations: int = 0
    reason: str = ""
    wall_time: float = 0.0

    @property
    def final_cost(self) -> float:
        return self.costs[-1] if self.costs else math.nan

    def summary(self) -> dict:
        return {"converged": self.converged, "iterations": self.iterations,
                "final_cost": self.final_cost, "wall_time": self.wall_time,
                "reason": self.reason}


class _Stop(Exception):
    pass


def optimize(cost: Callable, init, config: OptimizerConfig | None = None) -> OptimizationTrace:
    """Minimize ``cost`` from ``init``; the trace records the best cost after each iteration.

    Stops when the cost drops below ``cost_tolerance``, the parameter update
    falls below ``parameter_tolerance``, or after ``max_iters`` iterations.
    """
    config = config or OptimizerConfig()
    trace = OptimizationTrace()
    t_start = time.perf_counter()
    x0 = np.asarray(init, dtype=float).copy()

    def f(x):
        trace.evaluations += 1
        val = float(cost(x))
        if not math.isfinite(val):
            trace.params = np.array(x)
            trace.wall_time = time.perf_counter() - t_start
            raise OptimizationError(f"non-finite cost {val} at evaluation {trace.evaluations}", trace)
        return val

    c0 = f(x0)
    trace.costs.append(c0)
    trace.params = x0
    if c0 < config.cost_tolerance:
        trace.converged, trace.reason = True, "cost tolerance met at start"
    elif config.method == "nelder-mead":
        _nelder_mead(f, x0, c0, config, trace)
    else:
        _fd_gradient(f, x0, c0, config, trace)
    trace.wall_time = time.perf_counter() - t_start
    return trace


def _nelder_mead(f, x0, c0, config, trace):
    # scipy's simplex, rebuilt around the best vertex every ``restart_every``
    # iterations with a halved edge; plain NM stalls in ~20 dimensions
    dim = x0.size
    best = {"x": x0, "f": c0}
    step = config.initial_step
    chunk = config.restart_every or config.max_iters

    def tracked(x):
        val = f(x)
        if val < best["f"]:
            best["x"], best["f"] = np.array(x), val
        return val

    done = 0

    def callback(xk):
        trace.iterations += 1
        trace.costs.append(best["f"])
        if best["f"] < config.cost_tolerance:
            trace.converged, trace.reason = True, "cost tolerance met"
            raise _Stop

    try:
        while done < config.max_iters:
            start = best["x"]
            res = scipy.optimize.minimize(
                tracked, start, method="Nelder-Mead", callback=callback,
                options={"maxiter": min(chunk, config.max_iters - done),
                         "maxfev": 50 * config.max_iters,
                         "xatol": config.parameter_tolerance, "fatol": config.cost_tolerance,
                         "adaptive": dim > 4,
                         "initial_simplex": np.vstack([start, start + step * np.eye(dim)])})
            # scipy skips the callback on the final iteration of a run
            done += max(res.nit, 1)
            if trace.iterations < done:
                trace.iterations = done
                trace.costs.append(best["f"])
            if res.status == 0:
                trace.converged, trace.reason = True, "parameter tolerance met"
                break
            step = max(0.5 * step, 10 * config.parameter_tolerance)
        else:
            trace.reason = "max_iters reached"
    except _Stop:
        pass
    trace.params = best["x"]


def _fd_gradient(f, x0, c0, config, trace):
    x, fx = x0.copy(), c0
    h = config.fd_step
    step = config.initial_step
    for _ in range(config.max_iters):
        grad = np.empty_like(x)
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = h
            grad[i] = (f(x + e) - f(x - e)) / (2 * h)
        gnorm2 = float(grad @ grad)
        if gnorm2 == 0:
            trace.converged, trace.reason = True, "zero gradient"
            break
        # backtracking line search with Armijo condition
        while True:
            cand = x - step * grad
            fc = f(cand)
            if fc <= fx - 1e-4 * step * gnorm2 or step < 1e-14:
                break
            step *= 0.5
        moved = float(np.linalg.norm(cand - x))
        if fc < fx:
            x, fx = cand, fc
        trace.iterations += 1
        trace.costs.append(fx)
        step *= 2.0
        if fx < config.cost_tolerance:
            trace.converged, trace.reason = True, "cost tolerance met"
            break
        if moved < config.parameter_tolerance:
            trace.converged, trace.reason = True, "parameter tolerance met"
            break
    else:
        trace.reason = "max_iters reached"
    trace.params = x


# -- marching ------------------------------------------------------------------------------

@dataclass
class VqaMarch:
    trajectory: np.ndarray
    traces: list
    fidelities: np.ndarray
    reference: np.ndarray = field(repr=False)
    params: list = field(default_factory=list, repr=False)

    def relative_error(self, step: int = -1) -> float:
        ref = self.reference[step]
        return float(np.linalg.norm(self.trajectory[step] - ref) / np.linalg.norm(ref))

    @property
    def total_iterations(self) -> int:
        return sum(t.iterations for t in self.traces)


def fit_field(ansatz: Ansatz, u, config: OptimizerConfig | None = None, restarts: int = 5,
              init=None) -> OptimizationTrace:
    """Fit ``s |psi(theta)>`` to the field ``u``; best of several seeded restarts.

    Random starts need a much wider initial simplex than warm starts, so the
    default config here differs from :class:`OptimizerConfig`'s.
    """
    config = config or OptimizerConfig(max_iters=5000, cost_tolerance=1e-10, initial_step=0.5)
    u = np.asarray(u, dtype=float)
    identity = discretize(FlowProblem(N=u.size, U=0.0, D=0.0), "explicit")
    rng = np.random.default_rng(config.seed)
    best = None
    for r in range(restarts):
        if r == 0 and init is not None:
            start = np.asarray(init, dtype=float)
        else:
            start = np.append(rng.uniform(0, 2 * np.pi, ansatz.parameter_count),
                              np.linalg.norm(u))
        tr = optimize(lambda p: evaluate_cost(p, ansatz, identity, u), start, config)
        if best is None or tr.final_cost < best.final_cost:
            best = tr
        if best.converged and best.final_cost < config.cost_tolerance:
            break
    return best


def vqa_march(problem: FlowProblem, scheme: str, ansatz: Ansatz, config: OptimizerConfig,
              steps: int, warm_start: bool = True, init_params=None) -> VqaMarch:
    """March ``steps`` time steps variationally.

    The initial field is first fitted by the ansatz.  With ``warm_start`` every
    step starts from the previous step's optimum; otherwise every step restarts
    from the fitted initial-field parameters.  Non-converged steps are kept in
    the trace rather than raising.
    """
    op = discretize(problem, scheme)
    u0 = problem.initial_field()
    reference = classical_march(op, u0, steps)
    if init_params is None:
        init_params = fit_field(ansatz, u0, dataclasses.replace(
            config, max_iters=max(config.max_iters, 5000), initial_step=0.5,
            cost_tolerance=min(config.cost_tolerance, 1e-10))).params
    params = np.asarray(init_params, dtype=float)
    u = s_psi = params[-1] * _real_amplitudes(ansatz, params[:-1])
    traj, traces, fids, plist = [s_psi], [], [], [params]
    for j in range(steps):
        start = params if warm_start else plist[0]
        tr = optimize(lambda p: evaluate_cost(p, ansatz, op, u), start, config)
        params = tr.params
        u = params[-1] * _real_amplitudes(ansatz, params[:-1])
        traj.append(u)
        traces.append(tr)
        plist.append(params)
        fids.append(fidelity(u, reference[j + 1]))
    return VqaMarch(np.array(traj), traces, np.array(fids), reference, plist)


# -- barren plateau diagnostic ------------------------------------------------------------

def parity_cost(ansatz: Ansatz, theta) -> float:
    """Benchmark cost ``<psi(theta)| Z...Z |psi(theta)>`` (global parity)."""
    psi = _real_amplitudes(ansatz, np.asarray(theta, dtype=float))
    parity = np.array([1 - 2 * (bin(i).count("1") & 1) for i in range(psi.size)])
    return float(parity @ psi**2)


def gradient_variance(ansatz: Ansatz, samples: int, seed=None, fd_step: float = 1e-4) -> float:
    """Sample variance of ``dC/dtheta_0`` over uniform random angles, ``C`` = :func:`parity_cost`."""
    if samples < 2:
        raise ValidationError("need at least two samples")
    rng = np.random.default_rng(seed)
    grads = np.empty(samples)
    e = np.zeros(ansatz.parameter_count)
    e[0] = fd_step
    for i in range(samples):
        th = rng.uniform(0, 2 * np.pi, ansatz.parameter_count)
        grads[i] = (parity_cost(ansatz, th + e) - parity_cost(ansatz, th - e)) / (2 * fd_step)
    return float(np.var(grads, ddof=1))
