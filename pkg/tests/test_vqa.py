import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcfd.circuit import execute, metrics
from qcfd.errors import OptimizationError, ValidationError
from qcfd.flow import FlowProblem, classical_march, discretize
from qcfd.statevec import new_zero_state
from qcfd.vqa import (OptimizerConfig, ansatz_state, build_ansatz, evaluate_cost, fit_field,
                      gradient_variance, optimize, vqa_march)

BENCH = FlowProblem(N=16, L=1.0, dt=1e-4, U=10.0, D=1.0)
A4 = build_ansatz(4, 4)


@pytest.fixture(scope="module")
def fitted_u0():
    return fit_field(A4, BENCH.initial_field())


class TestAnsatz:
    def test_counts_no_layers(self):
        a = build_ansatz(3, 0)
        m = metrics(a.circuit(np.zeros(3)))
        assert a.parameter_count == 3
        assert m.two_q_gates == 0

    def test_counts_two_layers(self):
        a = build_ansatz(3, 2)
        m = metrics(a.circuit(np.zeros(9)))
        assert a.parameter_count == 9
        assert m.two_q_gates == 4

    def test_depth_linear_in_layers(self):
        depths = [metrics(build_ansatz(4, L).circuit(np.zeros(4 * (L + 1)))).depth
                  for L in range(5)]
        # the first CNOT chain overlaps the initial Ry column; later layers add a constant
        assert len(set(np.diff(depths[1:]))) == 1

    def test_zero_params(self):
        np.testing.assert_allclose(ansatz_state(A4, np.zeros(20)).amplitudes,
                                   np.eye(16)[0], atol=1e-15)

    def test_half_pi(self):
        amps = ansatz_state(build_ansatz(1, 0), [math.pi / 2]).amplitudes
        np.testing.assert_allclose(amps, [math.sqrt(0.5)] * 2, atol=1e-15)

    @given(st.integers(1, 5), st.integers(0, 3), st.integers(0, 2**32 - 1))
    def test_real_and_matches_circuit(self, n, layers, seed):
        a = build_ansatz(n, layers)
        th = np.random.default_rng(seed).uniform(0, 2 * np.pi, a.parameter_count)
        sv = ansatz_state(a, th)
        assert np.max(np.abs(sv.amplitudes.imag)) < 1e-14
        ref = execute(a.circuit(th), new_zero_state(n)).amplitudes
        np.testing.assert_allclose(sv.amplitudes, ref, atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            ansatz_state(A4, np.zeros(19))
        with pytest.raises(ValidationError):
            build_ansatz(2, -1)


class TestCost:
    def test_zero_residual(self, rng):
        a = build_ansatz(2, 1)
        op = discretize(FlowProblem(N=4), "explicit")
        th = rng.uniform(0, 2 * np.pi, a.parameter_count)
        psi = ansatz_state(a, th).amplitudes.real
        # choose u so that Mt u equals 3 psi exactly
        u = np.linalg.solve(op.matrix, 3 * psi)
        assert evaluate_cost(np.append(th, 3.0), a, op, u) < 1e-12
        imp = discretize(FlowProblem(N=4), "implicit")
        assert evaluate_cost(np.append(th, 3.0), a, imp, imp.matrix @ (3 * psi)) < 1e-12

    def test_orthogonal_equal_norm(self):
        a = build_ansatz(2, 0)
        ident = discretize(FlowProblem(N=4, U=0, D=0), "explicit")
        # psi = |00>, u = |11>
        assert evaluate_cost([0, 0, 1.0], a, ident, [0, 0, 0, 1.0]) == pytest.approx(2.0)

    @pytest.mark.parametrize("scheme", ["explicit", "implicit"])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_shots_within_bound(self, scheme, seed):
        a = build_ansatz(4, 1)
        op = discretize(BENCH, scheme)
        rng = np.random.default_rng(seed)
        u = rng.normal(size=16)
        u /= np.linalg.norm(u)
        p = np.append(rng.uniform(0, 2 * np.pi, a.parameter_count), 1.0)
        exact = evaluate_cost(p, a, op, u)
        est = evaluate_cost(p, a, op, u, shots=10_000, seed=seed)
        assert est >= 0
        assert abs(est - exact) <= 5 / math.sqrt(10_000)

    @settings(max_examples=25)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(["explicit", "implicit"]))
    def test_nonnegative(self, seed, scheme):
        rng = np.random.default_rng(seed)
        p = np.append(rng.uniform(0, 2 * np.pi, A4.parameter_count), rng.normal())
        assert evaluate_cost(p, A4, discretize(BENCH, scheme), rng.normal(size=16)) >= -1e-12

    def test_size_mismatch(self):
        with pytest.raises(ValidationError):
            evaluate_cost(np.zeros(21), A4, discretize(BENCH), np.ones(8))
        with pytest.raises(ValidationError):
            evaluate_cost(np.zeros(20), A4, discretize(BENCH), np.ones(16))

    def test_fd_gradient_second_order(self, rng):
        op = discretize(BENCH, "implicit")
        u = BENCH.initial_field()
        p = np.append(rng.uniform(0, 2 * np.pi, A4.parameter_count), 2.0)
        e = np.zeros_like(p)
        e[3] = 1.0
        c = lambda x: evaluate_cost(x, A4, op, u)

        def central(h):
            return (c(p + h * e) - c(p - h * e)) / (2 * h)

        # five-point stencil as the reference derivative
        h = 1e-3
        ref = (-c(p + 2 * h * e) + 8 * c(p + h * e) - 8 * c(p - h * e) + c(p - 2 * h * e)) / (12 * h)
        ratio = abs(central(0.1) - ref) / abs(central(0.05) - ref)
        assert 3.5 <= ratio <= 4.5

    def test_representable_step_exact(self):
        # n=2, one layer spans every real 2-qubit state
        p2 = FlowProblem(N=4, dt=1e-3)
        a = build_ansatz(2, 1)
        op = discretize(p2, "implicit")
        u0 = p2.initial_field() + 0.3
        target = classical_march(op, u0, 1)[1]
        cfg = OptimizerConfig(max_iters=5000, cost_tolerance=1e-14, parameter_tolerance=1e-14,
                              initial_step=0.5)
        tr = fit_field(a, target, cfg, restarts=10)
        assert evaluate_cost(tr.params, a, op, u0) < 1e-10


class TestOptimize:
    @pytest.mark.parametrize("method", ["nelder-mead", "finite-difference-gradient"])
    def test_quadratic_bowl(self, method):
        tr = optimize(lambda x: (x[0] - 1) ** 2, [5.0],
                      OptimizerConfig(method=method, initial_step=0.5))
        assert abs(tr.params[0] - 1) < 1e-4
        assert tr.converged

    def test_already_converged(self):
        tr = optimize(lambda x: 0.0, [1.0, 2.0])
        assert tr.iterations == 0 and tr.converged
        assert tr.costs == [0.0]

    def test_non_finite(self):
        def bad(x):
            return math.nan if x[0] < 4 else (x[0] - 1) ** 2

        with pytest.raises(OptimizationError) as info:
            optimize(bad, [5.0], OptimizerConfig(initial_step=2.0))
        assert info.value.trace.costs

    def test_max_iters(self):
        tr = optimize(lambda x: float(np.sum(np.cos(3 * x) + x**2)), np.ones(6) * 2,
                      OptimizerConfig(max_iters=7, cost_tolerance=1e-300))
        assert tr.iterations <= 7 and not tr.converged or tr.reason != "max_iters reached"

    def test_deterministic(self):
        cost = lambda p: evaluate_cost(p, A4, discretize(BENCH), BENCH.initial_field())
        init = np.append(np.full(20, 0.3), 3.0)
        cfg = OptimizerConfig(max_iters=200, initial_step=0.1)
        a, b = optimize(cost, init, cfg), optimize(cost, init, cfg)
        assert a.costs == b.costs
        assert a.params.tobytes() == b.params.tobytes()

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            OptimizerConfig(method="bfgs")
        with pytest.raises(ValidationError):
            OptimizerConfig(cost_tolerance=0)

    def test_trace_summary(self):
        s = optimize(lambda x: (x[0] - 1) ** 2, [5.0], OptimizerConfig(initial_step=0.5)).summary()
        assert {"converged", "iterations", "final_cost", "wall_time"} <= set(s)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(5))
    def test_benchmark_single_step(self, fitted_u0, seed):
        op = discretize(BENCH, "implicit")
        p0 = fitted_u0.params
        u = p0[-1] * ansatz_state(A4, p0[:-1]).amplitudes.real
        # warm start from the previous field's parameters, perturbed per seed
        init = p0 + np.random.default_rng(seed).normal(0, 1e-3, p0.size)
        tr = optimize(lambda p: evaluate_cost(p, A4, op, u), init,
                      OptimizerConfig(max_iters=2000, cost_tolerance=1e-8, seed=seed))
        assert tr.final_cost < 1e-6
        assert tr.iterations <= 2000


class TestMarch:
    def test_zero_dynamics(self):
        p = FlowProblem(U=0, D=0)
        cfg = OptimizerConfig(cost_tolerance=1e-8)
        res = vqa_march(p, "explicit", A4, cfg, 3)
        np.testing.assert_allclose(res.fidelities, 1, atol=1e-9)
        assert res.total_iterations == 0
        for q in res.params[1:]:
            np.testing.assert_array_equal(q, res.params[0])

    @pytest.mark.slow
    def test_warm_beats_cold(self, fitted_u0):
        cfg = OptimizerConfig(max_iters=2000, cost_tolerance=1e-8)
        warm = cold = 0
        for seed in (0, 1):
            c = OptimizerConfig(**{**cfg.__dict__, "seed": seed})
            warm += vqa_march(BENCH, "implicit", A4, c, 4, True, fitted_u0.params).total_iterations
            cold += vqa_march(BENCH, "implicit", A4, c, 4, False, fitted_u0.params).total_iterations
        assert warm < cold

    def test_short_march_tracks_classical(self, fitted_u0):
        cfg = OptimizerConfig(max_iters=2000, cost_tolerance=1e-8)
        res = vqa_march(BENCH, "implicit", A4, cfg, 3, init_params=fitted_u0.params)
        assert res.fidelities.min() > 0.999
        assert res.relative_error() < 0.01
        assert len(res.traces) == 3


class TestGradientVariance:
    def test_single_qubit_closed_form(self):
        assert gradient_variance(build_ansatz(1, 0), 4000, seed=0) == pytest.approx(0.5, abs=0.03)

    def test_decreases_with_width(self):
        v = [gradient_variance(build_ansatz(n, 6), 400, seed=1) for n in (2, 4, 6, 8)]
        assert all(a > b for a, b in zip(v, v[1:]))
        assert v[-1] > 0

    def test_needs_two_samples(self):
        with pytest.raises(ValidationError):
            gradient_variance(build_ansatz(1, 0), 1)
