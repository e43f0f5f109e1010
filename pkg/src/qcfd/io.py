"""File formats: trajectory CSV, dense array JSON, optimizer traces, atomic writes.

Array JSON (validated with :data:`ARRAY_SCHEMA`)::

    {"shape": [rows, cols], "dtype": "real" | "complex", "data": [...]}

``data`` is the row-major flattening; complex entries are ``[re, im]`` pairs.
"""

from __future__ import annotations

import io
import json
import os
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ValidationError

_NUMBER = {"type": "number"}
ARRAY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "dense array",
    "type": "object",
    "required": ["shape", "data"],
    "additionalProperties": False,
    "properties": {
        "shape": {"type": "array", "items": {"type": "integer", "minimum": 1},
                  "minItems": 1, "maxItems": 2},
        "dtype": {"enum": ["real", "complex"]},
        "data": {"type": "array", "items": {"oneOf": [
            _NUMBER,
            {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
        ]}},
    },
}


def atomic_write(path, text: str | bytes) -> Path:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = text.encode() if isinstance(text, str) else text
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _csv(header, rows) -> str:
    buf = io.StringIO()
    np.savetxt(buf, np.asarray(rows, dtype=float), fmt="%.12g", delimiter=",",
               header=",".join(header), comments="")
    return buf.getvalue()


def trajectory_csv(times, trajectory) -> str:
    """``t,x_0,...,x_{N-1}`` header then one row per time, 12 significant digits."""
    times = np.asarray(times, dtype=float)
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim != 2 or traj.shape[0] != times.size:
        raise ValidationError("trajectory must be (len(times), N)")
    header = ["t"] + [f"x_{i}" for i in range(traj.shape[1])]
    return _csv(header, np.column_stack([times, traj]))


def table_csv(columns: dict) -> str:
    """CSV from named equal-length columns, 12 significant digits."""
    cols = [np.asarray(v, dtype=float).ravel() for v in columns.values()]
    if len({c.size for c in cols}) > 1:
        raise ValidationError("columns must have equal length")
    return _csv(list(columns), np.column_stack(cols))


def read_trajectory_csv(text: str):
    """Inverse of :func:`trajectory_csv`; returns ``(times, trajectory)``."""
    arr = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    return arr[:, 0], arr[:, 1:]


def dumps_array(a) -> str:
    a = np.asarray(a)
    if a.ndim not in (1, 2) or a.size == 0:
        raise ValidationError("only nonempty vectors and matrices are supported")
    flat = a.ravel()
    if np.iscomplexobj(a):
        data = [[float(z.real), float(z.imag)] for z in flat]
        dtype = "complex"
    else:
        data = [float(x) for x in flat]
        dtype = "real"
    return json.dumps({"shape": list(a.shape), "dtype": dtype, "data": data})


def loads_array(text: str) -> np.ndarray:
    """Parse and validate array JSON; complex if any entry is a ``[re, im]`` pair."""
    doc = json.loads(text)
    try:
        jsonschema.validate(doc, ARRAY_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"invalid array JSON: {exc.message}") from None
    shape = tuple(doc["shape"])
    data = doc["data"]
    if len(data) != int(np.prod(shape)):
        raise ValidationError(f"{len(data)} entries do not fill shape {shape}")
    is_complex = doc.get("dtype") == "complex" or any(isinstance(x, list) for x in data)
    if is_complex:
        out = np.array([complex(*x) if isinstance(x, list) else complex(x) for x in data])
    else:
        out = np.array(data, dtype=float)
    return out.reshape(shape)


def trace_csv(trace) -> str:
    """``iteration,cost`` for an :class:`~qcfd.vqa.OptimizationTrace`."""
    return table_csv({"iteration": np.arange(len(trace.costs)), "cost": trace.costs})


def trace_summary_json(trace) -> str:
    return json.dumps(trace.summary(), indent=2)
