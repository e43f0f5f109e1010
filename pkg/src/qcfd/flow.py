"""1D periodic advection-diffusion numerics, Carleman linearization, and the
quantum-backed time-marching driver.

The model problem is ``u_t + U u_x = D u_xx`` on ``[0, L)`` with periodic
boundaries, discretized with central differences in space.  The explicit
scheme advances ``u^{j+1} = Mt u^j``; the implicit scheme solves
``M u^{j+1} = u^j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .algorithms import HhlConfig, circulant_lcu, hhl_solve, lcu_apply
from .errors import CapacityError, ConditionNumberError, SingularityError, ValidationError
from .statevec import Statevector, fidelity

GAUSSIAN_MODES = 32
# step matrices are stored densely; 4096^2 doubles is 128 MiB
MAX_DENSE_GRID = 1 << 12


@dataclass(frozen=True)
class FlowProblem:
    """Grid, physical constants and initial profile.

    ``initial`` is ``("sine", k)`` or ``("gaussian", center, width)`` with
    center and width in metres; the Gaussian is ``exp(-(x-c)^2 / (2 w^2))``.
    """

    N: int = 16
    L: float = 1.0
    dt: float = 1e-4
    U: float = 10.0
    D: float = 1.0
    initial: tuple = ("sine", 1)

    def __post_init__(self):
        if self.N < 4:
            raise ValidationError(f"need at least 4 grid points, got {self.N}")
        if self.N & (self.N - 1):
            raise ValidationError(f"N must be a power of two, got {self.N}")
        if not self.dt > 0:
            raise ValidationError("dt must be > 0")
        if not self.D >= 0:
            raise ValidationError("D must be >= 0")
        if not self.L > 0:
            raise ValidationError("L must be > 0")
        kind = self.initial[0]
        if kind == "sine":
            if len(self.initial) != 2 or int(self.initial[1]) != self.initial[1]:
                raise ValidationError("sine initial condition is ('sine', k)")
        elif kind == "gaussian":
            if len(self.initial) != 3 or not self.initial[2] > 0:
                raise ValidationError("gaussian initial condition is ('gaussian', center, width)")
        else:
            raise ValidationError(f"unknown initial condition {kind!r}")

    @classmethod
    def gaussian(cls, **kw) -> "FlowProblem":
        L = kw.get("L", 1.0)
        return cls(initial=("gaussian", L / 4, 0.05 * L), **kw)

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.N) * self.dx

    def initial_field(self) -> np.ndarray:
        return analytic_solution(self, self.grid, 0.0)


@dataclass
class StepOperator:
    scheme: str
    matrix: np.ndarray
    stencil: dict
    problem: FlowProblem
    diffusion_number: float
    courant_number: float


def discretize(problem: FlowProblem, scheme: str = "explicit") -> StepOperator:
    """Periodic central-difference step matrix.

    ``stencil`` maps a neighbour offset to its coefficient, e.g. ``{-1: a,
    0: b, 1: c}`` means row ``i`` reads ``a u_{i-1} + b u_i + c u_{i+1}``.
    Stability is not enforced; the diffusion and Courant numbers are attached.
    """
    if problem.N > MAX_DENSE_GRID:
        raise CapacityError(f"grid of {problem.N} points exceeds the dense limit {MAX_DENSE_GRID}")
    r = problem.D * problem.dt / problem.dx**2
    c = problem.U * problem.dt / problem.dx
    if scheme == "explicit":
        stencil = {-1: r + c / 2, 0: 1 - 2 * r, 1: r - c / 2}
    elif scheme == "implicit":
        stencil = {-1: -r - c / 2, 0: 1 + 2 * r, 1: c / 2 - r}
    else:
        raise ValidationError(f"scheme must be 'explicit' or 'implicit', got {scheme!r}")
    N = problem.N
    A = np.zeros((N, N))
    rows = np.arange(N)
    for off, coef in stencil.items():
        A[rows, (rows + off) % N] += coef
    return StepOperator(scheme, A, stencil, problem, r, c)


def _gaussian_modes(problem: FlowProblem, modes: int = GAUSSIAN_MODES):
    _, centre, width = problem.initial
    m = np.arange(-modes, modes + 1)
    kappa = 2 * math.pi * m / problem.L
    coef = width * math.sqrt(2 * math.pi) / problem.L * np.exp(-0.5 * (kappa * width) ** 2) \
        * np.exp(-1j * kappa * centre)
    return kappa, coef


def analytic_solution(problem: FlowProblem, x, t: float):
    """Exact periodic solution: every Fourier mode advects at ``U`` and decays as ``exp(-D k^2 t)``.

    The Gaussian profile is represented by its periodized Fourier series
    truncated to ``GAUSSIAN_MODES`` modes on each side.
    """
    x = np.asarray(x, dtype=float)
    if problem.initial[0] == "sine":
        kappa = 2 * math.pi * problem.initial[1] / problem.L
        return np.exp(-problem.D * kappa**2 * t) * np.sin(kappa * (x - problem.U * t))
    kappa, coef = _gaussian_modes(problem)
    phase = np.exp(1j * np.multiply.outer(x - problem.U * t, kappa))
    return np.real(phase @ (coef * np.exp(-problem.D * kappa**2 * t)))


def classical_march(op: StepOperator, u0, steps: int) -> np.ndarray:
    """Trajectory ``[u^0, u^1, ..., u^steps]`` as a ``(steps + 1, N)`` array."""
    u = np.asarray(u0, dtype=float).copy()
    if u.shape != (op.matrix.shape[0],):
        raise ValidationError("initial field does not match the grid")
    if not np.linalg.norm(u) > 0:
        raise ValidationError("initial field must be nonzero")
    traj = np.empty((steps + 1, u.size))
    traj[0] = u
    if op.scheme == "explicit":
        for j in range(steps):
            u = op.matrix @ u
            traj[j + 1] = u
        return traj
    if np.linalg.cond(op.matrix) > 1e12:
        raise ConditionNumberError("implicit step matrix is singular")
    lu = scipy.linalg.lu_factor(op.matrix)
    for j in range(steps):
        u = scipy.linalg.lu_solve(lu, u)
        traj[j + 1] = u
    return traj


@dataclass
class QuantumMarch:
    trajectory: np.ndarray
    fidelities: np.ndarray
    success_probabilities: np.ndarray
    reference: np.ndarray = field(repr=False)

    def relative_error(self, step: int = -1) -> float:
        ref = self.reference[step]
        return float(np.linalg.norm(self.trajectory[step] - ref) / np.linalg.norm(ref))


def step_lcu(op: StepOperator):
    """LCU decomposition of the explicit step into identity and cyclic shifts."""
    n = op.problem.N.bit_length() - 1
    return circulant_lcu(op.stencil, n)


def quantum_march(op: StepOperator, u0, steps: int, method: str = "hhl",
                  config: HhlConfig | None = None) -> QuantumMarch:
    """March with a quantum subroutine per step and compare against the classical march.

    ``method="lcu"`` applies the explicit step matrix through its LCU
    decomposition; the field norm comes back from the success probability.
    ``method="hhl"`` solves the implicit system; HHL returns a direction only,
    so the norm is restored by the least-squares fit of ``M (s x) = u^j``.
    Readout is the exact post-selected statevector.
    """
    if method == "lcu" and op.scheme != "explicit":
        raise ValidationError("LCU marching applies the explicit step matrix")
    if method == "hhl" and op.scheme != "implicit":
        raise ValidationError("HHL marching solves the implicit step system")
    if method not in ("lcu", "hhl"):
        raise ValidationError(f"unknown method {method!r}")
    reference = classical_march(op, u0, steps)
    u = reference[0].copy()
    traj = [u.copy()]
    fids, probs = [], []
    decomp = step_lcu(op) if method == "lcu" else None
    for j in range(steps):
        if method == "lcu":
            out, p = lcu_apply(decomp, Statevector.from_vector(u))
            if out is None:
                raise ConditionNumberError(f"LCU step {j} had zero success probability")
            u = out.to_field().real
        else:
            res = hhl_solve(op.matrix, u, config)
            x = np.real(res.solution)
            Mx = op.matrix @ x
            u = x * float(Mx @ u) / float(Mx @ Mx)
            p = res.success_probability
        traj.append(u.copy())
        probs.append(p)
        fids.append(fidelity(u, reference[j + 1]))
    return QuantumMarch(np.array(traj), np.array(fids), np.array(probs), reference)


# -- Carleman linearization ------------------------------------------------------

@dataclass
class CarlemanSystem:
    """Truncated linear system ``dy/dt = M y`` for ``y_k = x^k``, ``k = 1..K``."""

    order: int
    matrix: np.ndarray
    linear: float = 0.0
    quadratic: float = 1.0

    @property
    def nilpotent(self) -> bool:
        return self.linear == 0


def carleman_build(K: int, linear: float = 0.0, quadratic: float = 1.0) -> CarlemanSystem:
    """Carleman matrix for ``dx/dt = linear * x + quadratic * x^2`` truncated at order ``K``.

    ``d(x^k)/dt = k*linear*x^k + k*quadratic*x^(k+1)``; the ``x^(K+1)`` term
    of the last row is dropped.
    """
    if int(K) != K or K < 1:
        raise ValidationError(f"Carleman order must be an integer >= 1, got {K}")
    k = np.arange(1, K + 1, dtype=float)
    M = np.diag(k * linear) + np.diag(k[:-1] * quadratic, 1)
    return CarlemanSystem(int(K), M, linear, quadratic)


def carleman_march(system: CarlemanSystem, x0: float, t_max: float, dt: float = 1e-3):
    """RK4 integration of the truncated system; returns ``(times, x(t))``.

    ``x(t)`` is the first Carleman variable.  ``t_max`` is rounded to a whole
    number of steps.
    """
    if not dt > 0:
        raise ValidationError("dt must be > 0")
    steps = int(round(t_max / dt))
    M = system.matrix
    y = float(x0) ** np.arange(1, system.order + 1)
    out = np.empty(steps + 1)
    out[0] = y[0]
    for i in range(steps):
        k1 = M @ y
        k2 = M @ (y + 0.5 * dt * k1)
        k3 = M @ (y + 0.5 * dt * k2)
        k4 = M @ (y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = y[0]
    return np.arange(steps + 1) * dt, out


def carleman_truncated(system: CarlemanSystem, x0: float, times) -> np.ndarray:
    """Exact solution of the truncated linear system, ``[exp(M t) y0]_1``.

    For the nilpotent case this is the finite polynomial ``sum_j (M t)^j / j!``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    y0 = float(x0) ** np.arange(1, system.order + 1)
    M = system.matrix
    if not system.nilpotent:
        return np.array([(scipy.linalg.expm(M * t) @ y0)[0] for t in times])
    # rows of M^j y0, then combine with t^j / j!
    powers = [y0]
    for _ in range(system.order - 1):
        powers.append(M @ powers[-1])
    first = np.array([p[0] for p in powers])
    fact = np.array([math.factorial(j) for j in range(system.order)], dtype=float)
    return (times[:, None] ** np.arange(system.order) / fact) @ first


def carleman_exact(x0: float, t: float) -> float:
    """Closed-form solution ``x0 / (1 - x0 t)`` of ``dx/dt = x^2``."""
    if x0 * t >= 1 or abs(1 - x0 * t) < 1e-12:
        raise SingularityError(f"finite-time blow-up: x0*t = {x0 * t} reaches the pole at 1")
    return x0 / (1 - x0 * t)
