"""Command-line experiment runner.

Every run writes its data files plus ``manifest.json`` into the output
directory (``--out``, else ``$QCFD_OUTPUT_DIR``, else ``./qcfd-output``).
``qcfd replay manifest.json`` re-runs a manifest and reproduces the data
files byte for byte.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 capacity.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as qio
from .algorithms import HhlConfig, bell_circuit, qft_circuit
from .circuit import QuantumCircuit, dumps, execute, gate, metrics, unitary
from .errors import CapacityError, NumericalError, QcfdError, SingularityError, ValidationError
from .flow import (FlowProblem, analytic_solution, carleman_build, carleman_exact,
                   carleman_march, classical_march, discretize, quantum_march)
from .noise import (NoiseModel, mitigated_expectation, noisy_probabilities, noisy_shots,
                    sample_shots)
from .statevec import Statevector, new_zero_state

OUTPUT_ENV = "QCFD_OUTPUT_DIR"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_CAPACITY = 0, 2, 3, 4


def _ints(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _floats(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


# name -> (type, default, help); the defaults double as the config schema
EXPERIMENTS = {
    "bell": {
        "_stochastic": True,
        "shots": (int, 10_000, "number of shots"),
        "noise": (str, "ideal", "noise preset"),
    },
    "qft": {
        "_stochastic": False,
        "n": (int, 3, "number of qubits"),
        "inverse": (bool, False, "emit the inverse QFT"),
    },
    "carleman": {
        "_stochastic": False,
        "orders": (str, "2,3,4,5,6", "comma-separated truncation orders"),
        "x0": (float, 0.8, "initial condition of dx/dt = x^2"),
        "tmax": (float, 1.0, "final time"),
        "dt": (float, 1e-3, "RK4 step"),
        "tolerance": (float, 1e-3, "departure threshold"),
    },
    "advect": {
        "_stochastic": None,  # only for method=vqa
        "method": (str, "classical", "classical | hhl | lcu | vqa"),
        "scheme": (str, None, "explicit | implicit (default by method)"),
        "n": (int, 16, "grid points (power of two)"),
        "dt": (float, 1e-4, "time step [s]"),
        "U": (float, 10.0, "advection speed [m/s]"),
        "D": (float, 1.0, "diffusivity [m^2/s]"),
        "L": (float, 1.0, "domain length [m]"),
        "steps": (int, 100, "number of time steps"),
        "initial": (str, "sine", "sine | gaussian"),
        "mode": (int, 1, "sine wavenumber"),
        "clock_qubits": (int, 8, "HHL clock register size"),
        "layers": (int, 4, "VQA ansatz layers"),
        "max_iters": (int, 2000, "VQA iterations per step"),
        "cost_tolerance": (float, 1e-8, "VQA cost tolerance"),
    },
    "noise-sweep": {
        "_stochastic": True,
        "noise": (str, "sherbrooke-2024", "noise preset"),
        "T1": (float, None, "override T1 [s]"),
        "T2": (float, None, "override T2 [s]"),
        "times": (str, "0,0.25,0.5,1,1.5,2,3", "idle times in units of T1"),
        "trajectories": (int, 10_000, "trajectories per time"),
    },
    "mitigate": {
        "_stochastic": True,
        "noise": (str, "sherbrooke-2024", "noise preset"),
        "scales": (str, "1,3", "odd noise scale factors"),
        "trajectories": (int, 100_000, "trajectories per scale"),
        "trials": (int, 10, "independent repetitions"),
    },
    "shots-scaling": {
        "_stochastic": True,
        "shots": (str, "100,1000,10000,100000,1000000", "shot counts"),
        "repeats": (int, 20, "repetitions per shot count"),
        "qubits": (int, 3, "width of the random benchmark state"),
    },
}
COMMON = {"seed": (int, None, "master seed"), "entropy": (bool, False, "draw a fresh seed")}


def config_schema(experiment: str) -> dict:
    """JSON schema of the ``--config`` file for one experiment."""
    jtype = {int: "integer", float: "number", str: "string", bool: "boolean"}
    props = {}
    for name, opts in {**EXPERIMENTS[experiment], **COMMON}.items():
        if name.startswith("_"):
            continue
        t = jtype[opts[0]]
        props[name] = {"type": [t, "null"] if opts[1] is None else t}
    props["experiment"] = {"const": experiment}
    return {"type": "object", "properties": props, "additionalProperties": False}


class UsageError(QcfdError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qcfd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qcfd {__version__}")
    sub = p.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name, opts in EXPERIMENTS.items():
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="JSON config file; flags override it")
        sp.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./qcfd-output)")
        for opt, entry in {**opts, **COMMON}.items():
            if opt.startswith("_"):
                continue
            typ, default, helptext = entry
            flag = "--" + opt.replace("_", "-")
            if typ is bool:
                sp.add_argument(flag, dest=opt, action="store_const", const=True, default=None,
                                help=helptext)
            else:
                sp.add_argument(flag, dest=opt, type=typ, default=None,
                                help=f"{helptext} (default {default})")
    rp = sub.add_parser("replay", help="re-run a manifest")
    rp.add_argument("manifest")
    rp.add_argument("--out", help="output directory (default: the manifest's directory)")
    return p


def resolve_config(experiment: str, args: dict, config_file: str | None = None) -> dict:
    """Defaults, then the config file, then explicit flags."""
    import jsonschema

    opts = {**EXPERIMENTS[experiment], **COMMON}
    resolved = {k: v[1] for k, v in opts.items() if not k.startswith("_")}
    if config_file:
        try:
            doc = json.loads(Path(config_file).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {config_file}: {exc}") from None
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object")
        unknown = sorted(set(doc) - set(resolved) - {"experiment"})
        if unknown:
            raise ValidationError(f"unknown config key(s) for {experiment}: {', '.join(unknown)}")
        try:
            jsonschema.validate(doc, config_schema(experiment))
        except jsonschema.ValidationError as exc:
            raise ValidationError(f"config key {'.'.join(map(str, exc.path))}: {exc.message}") from None
        resolved.update({k: v for k, v in doc.items() if k != "experiment"})
    resolved.update({k: v for k, v in args.items() if k in resolved and v is not None})
    stochastic = opts["_stochastic"]
    if stochastic is None:
        stochastic = resolved.get("method") == "vqa"
    if stochastic and resolved["seed"] is None:
        if not resolved["entropy"]:
            raise ValidationError(f"{experiment} is stochastic: pass --seed or --entropy")
        resolved["seed"] = int(np.random.SeedSequence().entropy % (1 << 63))
    resolved["entropy"] = False  # a recorded seed replays deterministically
    return resolved


# -- experiments: each returns {filename: text, ...}, kind map -----------------------

def _bell(cfg):
    state = execute(bell_circuit(), new_zero_state(2))
    noise = NoiseModel.preset(cfg["noise"])
    if noise.is_ideal:
        hist = sample_shots(state, cfg["shots"], cfg["seed"])
    else:
        hist = noisy_shots(bell_circuit(), noise, cfg["shots"], cfg["seed"])
    return {"bell_histogram.json": hist.to_json() + "\n"}


def _qft(cfg):
    n = cfg["n"]
    circ = qft_circuit(n, cfg["inverse"])
    k = np.arange(1 << n)
    sign = 1 if cfg["inverse"] else -1
    # QFT |j> = sum_k exp(+2 pi i jk / N) |k> / sqrt(N)
    dft = np.exp(-sign * 2j * np.pi * np.outer(k, k) / (1 << n)) / math.sqrt(1 << n)
    err = float(np.max(np.abs(unitary(circ) - dft))) if n <= 10 else None
    m = metrics(circ)
    info = {"n": n, "inverse": cfg["inverse"], "gate_count": m.gate_count,
            "expected_gate_count": n * (n + 1) // 2 + n // 2, "depth": m.depth,
            "two_qubit_gates": m.two_q_gates, "max_abs_error_vs_dft": err}
    return {"qft_circuit.txt": dumps(circ), "qft_metrics.json": json.dumps(info, indent=2) + "\n"}


def _carleman(cfg):
    orders = _ints(cfg["orders"])
    x0, tmax = cfg["x0"], cfg["tmax"]
    if x0 * tmax >= 1:
        raise SingularityError(f"tmax must stay below the blow-up time 1/x0 = {1 / x0:g}")
    cols, summary = {}, []
    times = exact = None
    for K in orders:
        t, x = carleman_march(carleman_build(K), x0, tmax, cfg["dt"])
        if times is None:
            times = t
            exact = np.array([carleman_exact(x0, ti) for ti in t])
            cols["t"], cols["exact"] = t, exact
        err = np.abs(x - exact)
        cols[f"x_K{K}"] = x
        cols[f"error_K{K}"] = err
        bad = np.flatnonzero(err >= cfg["tolerance"])
        departure = float(times[bad[0]]) if bad.size else float(times[-1])
        summary.append({"order": K, "linf_error": float(err.max()), "departure_time": departure})
    return {"carleman.csv": qio.table_csv(cols),
            "carleman_summary.json": json.dumps(summary, indent=2) + "\n"}


def _advect(cfg):
    from .vqa import OptimizerConfig, build_ansatz, vqa_march

    method = cfg["method"]
    if method not in ("classical", "hhl", "lcu", "vqa"):
        raise ValidationError(f"unknown method {method!r}")
    scheme = cfg["scheme"] or {"hhl": "implicit", "lcu": "explicit"}.get(method, "implicit")
    if cfg["initial"] == "sine":
        initial = ("sine", cfg["mode"])
    elif cfg["initial"] == "gaussian":
        initial = ("gaussian", cfg["L"] / 4, 0.05 * cfg["L"])
    else:
        raise ValidationError(f"unknown initial condition {cfg['initial']!r}")
    prob = FlowProblem(N=cfg["n"], L=cfg["L"], dt=cfg["dt"], U=cfg["U"], D=cfg["D"],
                       initial=initial)
    op = discretize(prob, scheme)
    steps = cfg["steps"]
    times = np.arange(steps + 1) * prob.dt
    analytic = np.array([analytic_solution(prob, prob.grid, t) for t in times])
    files, extra = {}, {}
    if method == "classical":
        traj = classical_march(op, prob.initial_field(), steps)
        ref = traj
        fid = np.ones(steps + 1)
    elif method in ("hhl", "lcu"):
        res = quantum_march(op, prob.initial_field(), steps, method,
                            HhlConfig(clock_qubits=cfg["clock_qubits"]))
        traj, ref = res.trajectory, res.reference
        fid = np.concatenate([[1.0], res.fidelities])
        extra["success_probability"] = np.concatenate([[1.0], res.success_probabilities])
    else:
        ansatz = build_ansatz(prob.N.bit_length() - 1, cfg["layers"])
        oc = OptimizerConfig(max_iters=cfg["max_iters"], cost_tolerance=cfg["cost_tolerance"],
                             seed=cfg["seed"])
        res = vqa_march(prob, scheme, ansatz, oc, steps)
        traj, ref = res.trajectory, res.reference
        fid = np.concatenate([[1.0], res.fidelities])
        extra["iterations"] = np.array([0] + [t.iterations for t in res.traces])
        extra["final_cost"] = np.array([0.0] + [t.final_cost for t in res.traces])
        files["vqa_trace.csv"] = qio.table_csv({
            "step": np.concatenate([np.full(len(t.costs), j + 1) for j, t in enumerate(res.traces)]),
            "iteration": np.concatenate([np.arange(len(t.costs)) for t in res.traces]),
            "cost": np.concatenate([t.costs for t in res.traces])})
        files["vqa_summary.json"] = json.dumps({
            "converged": all(t.converged for t in res.traces),
            "iterations": res.total_iterations,
            "final_cost": res.traces[-1].final_cost if res.traces else None,
            "wall_time": sum(t.wall_time for t in res.traces)}, indent=2) + "\n"
    rel = np.linalg.norm(traj - ref, axis=1) / np.linalg.norm(ref, axis=1)
    rel_analytic = np.linalg.norm(ref - analytic, axis=1) / np.linalg.norm(analytic, axis=1)
    files["trajectory.csv"] = qio.trajectory_csv(times, traj)
    files["fidelity.csv"] = qio.table_csv({
        "step": np.arange(steps + 1), "t": times, "fidelity": fid,
        "relative_error_vs_classical": rel, "classical_error_vs_analytic": rel_analytic, **extra})
    return files


def _noise_sweep(cfg):
    base = NoiseModel.preset(cfg["noise"]).to_dict()
    for key in ("T1", "T2"):
        if cfg[key] is not None:
            base[key] = cfg[key]
    noise = NoiseModel(**base)
    if math.isinf(noise.T1):
        raise ValidationError("noise sweep needs a finite T1")
    ratios = _floats(cfg["times"])
    if any(r < 0 for r in ratios):
        raise ValidationError("idle times must be >= 0")
    # gate errors are off so the curves isolate T1 / T2 decay
    idle = NoiseModel(T1=noise.T1, T2=noise.T2)
    rng = np.random.default_rng(cfg["seed"])
    rows = {k: [] for k in ("t_over_T1", "t", "excited_population", "excited_se",
                            "excited_analytic", "ramsey_p0", "ramsey_se", "ramsey_analytic")}
    for r, child in zip(ratios, rng.spawn(len(ratios))):
        t = r * noise.T1
        a, b = child.spawn(2)
        # X then idle: excited population should follow exp(-t/T1)
        flip = QuantumCircuit(1, (gate("X", 0, duration=0.0), gate("DELAY", 0, params=[t])))
        p, se = noisy_probabilities(flip, idle, cfg["trajectories"], a)
        # H, idle, H: P(0) = (1 + exp(-t/T2)) / 2
        ramsey = QuantumCircuit(1, (gate("H", 0, duration=0.0), gate("DELAY", 0, params=[t]),
                                    gate("H", 0, duration=0.0)))
        q, qse = noisy_probabilities(ramsey, idle, cfg["trajectories"], b)
        for k, v in zip(rows, (r, t, p[1], se[1], math.exp(-t / noise.T1),
                               q[0], qse[0], 0.5 * (1 + math.exp(-t / noise.T2)))):
            rows[k].append(v)
    return {"noise_sweep.csv": qio.table_csv(rows)}


def _mitigate(cfg):
    noise = NoiseModel.preset(cfg["noise"])
    scales = _ints(cfg["scales"])
    circ = QuantumCircuit(1, (gate("RX", 0, params=[math.pi]),))
    z = np.array([1.0, -1.0])
    ideal = -1.0
    rows = {"trial": [], **{f"scale_{c}": [] for c in scales}, "extrapolated": [],
            "ideal": [], "improved": []}
    for trial, child in enumerate(np.random.default_rng(cfg["seed"]).spawn(cfg["trials"])):
        est, pts = mitigated_expectation(circ, z, noise, scales, cfg["trajectories"], child)
        rows["trial"].append(trial)
        for c, v in pts:
            rows[f"scale_{c}"].append(v)
        rows["extrapolated"].append(est)
        rows["ideal"].append(ideal)
        rows["improved"].append(float(abs(est - ideal) < abs(pts[0][1] - ideal)))
    return {"mitigate.csv": qio.table_csv(rows)}


def _shots_scaling(cfg):
    shots = [int(float(s)) for s in str(cfg["shots"]).split(",")]
    rng = np.random.default_rng(cfg["seed"])
    n = cfg["qubits"]
    amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    state = Statevector.from_vector(amps)
    p_true = state.probabilities()
    mean_err = []
    for ns, child in zip(shots, rng.spawn(len(shots))):
        errs = [np.mean(np.abs(sample_shots(state, ns, g).to_array() / ns - p_true))
                for g in child.spawn(cfg["repeats"])]
        mean_err.append(float(np.mean(errs)))
    slope = float(np.polyfit(np.log10(shots), np.log10(mean_err), 1)[0])
    return {"shots_scaling.csv": qio.table_csv({"shots": shots, "mean_abs_error": mean_err}),
            "shots_scaling_fit.json": json.dumps({"loglog_slope": slope}, indent=2) + "\n"}


RUNNERS = {"bell": _bell, "qft": _qft, "carleman": _carleman, "advect": _advect,
           "noise-sweep": _noise_sweep, "mitigate": _mitigate, "shots-scaling": _shots_scaling}

# files carrying wall-clock timings; everything else is reproducible data
_TIMING_FILES = {"vqa_summary.json"}


def run_experiment(experiment: str, cfg: dict, out_dir) -> dict:
    """Run one experiment, write its files atomically and return the manifest."""
    out = Path(out_dir)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    t0 = time.perf_counter()
    files = RUNNERS[experiment](cfg)
    listed = []
    for name, text in files.items():
        qio.atomic_write(out / name, text)
        listed.append({"path": name, "sha256": hashlib.sha256(text.encode()).hexdigest(),
                       "kind": "timing" if name in _TIMING_FILES else "data"})
    manifest = {
        "experiment": experiment,
        "config": cfg,
        "seed": cfg.get("seed"),
        "software": {"qcfd": __version__, "numpy": np.__version__,
                     "python": sys.version.split()[0]},
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "wall_time": time.perf_counter() - t0,
        "files": listed,
    }
    qio.atomic_write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return manifest


def _output_dir(flag):
    return Path(flag or os.environ.get(OUTPUT_ENV) or "qcfd-output")


def main(argv=None) -> int:
    try:
        args = vars(build_parser().parse_args(argv))
        experiment = args.pop("experiment")
        if experiment == "replay":
            path = Path(args["manifest"])
            try:
                old = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ValidationError(f"cannot read manifest {path}: {exc}") from None
            experiment = old.get("experiment")
            if experiment not in RUNNERS:
                raise ValidationError(f"manifest names unknown experiment {experiment!r}")
            cfg = resolve_config(experiment, old.get("config", {}))
            out = Path(args["out"]) if args["out"] else path.parent
        else:
            cfg = resolve_config(experiment, args, args.get("config"))
            out = _output_dir(args.get("out"))
        manifest = run_experiment(experiment, cfg, out)
        for f in manifest["files"]:
            print(out / f["path"])
        print(out / "manifest.json")
        return EXIT_OK
    except (UsageError, ValidationError) as exc:
        print(f"qcfd: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CapacityError, MemoryError) as exc:
        print(f"qcfd: capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (NumericalError, FloatingPointError) as exc:
        print(f"qcfd: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
