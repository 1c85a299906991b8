"""File formats: binary state snapshots, NDJSON trajectories and CSV tables.

Every float is written with 17 significant digits so that identical runs
produce identical bytes and values round-trip exactly.
"""
from __future__ import annotations

import json
import math
import struct

import numpy as np

from .grid import GridParams

MAGIC = b"PADR"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIII")


def fmt(x):
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x} cannot be serialized")
    return format(x, ".17g")


def write_snapshot(path, params, u):
    u = np.asarray(u, dtype="<f8")
    if u.shape != (params.M,):
        raise ValueError("state does not match the grid")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, params.p, params.n, params.N))
        fh.write(u.tobytes())


def read_snapshot(path):
    """``(GridParams, state)`` from a snapshot file."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, p, n, N = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a state snapshot")
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported snapshot version {version}")
        params = GridParams(p, n, N)
        body = fh.read()
    if len(body) != 8 * params.M:
        raise ValueError(f"{path}: expected {params.M} values, found {len(body) / 8:g}")
    return params, np.frombuffer(body, dtype="<f8").astype(np.float64)


def to_json(obj):
    """Compact JSON with fixed float formatting and insertion-ordered keys."""
    if isinstance(obj, dict):
        return "{" + ",".join(f"{to_json(str(k))}:{to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(to_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def trajectory_records(traj):
    dist = traj.sup_distance_to_target
    for k, (t, u, e) in enumerate(zip(traj.times, traj.snapshots, traj.energy_trace)):
        rec = {"t": t, "min": float(u.min()), "max": float(u.max()), "energy": e.as_dict()}
        if dist is not None:
            rec["sup_dist_to_target"] = dist[k]
        yield rec


def write_trajectory_ndjson(path, traj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in trajectory_records(traj):
            fh.write(to_json(rec) + "\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else (str(v) if isinstance(v, (int, np.integer)) else fmt(v)) for v in row) + "\n")


def write_energy_csv(path, traj):
    rows = [(t, e.interaction, e.potential, e.total) for t, e in zip(traj.times, traj.energy_trace)]
    _write_csv(path, ("t", "interaction", "potential", "total"), rows)


def write_spectrum_csv(path, eigenvalues):
    _write_csv(path, ("eigenvalue",), [(float(w),) for w in eigenvalues])


def write_matrix_csv(path, A):
    """Dense matrix, one grid ordinal per row, no header."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in np.asarray(A):
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_convergence_csv(path, rows):
    _write_csv(
        path,
        ("N_coarse", "N_fine", "sup_gap", "semigroup_gap", "runtime_ms"),
        [(r.N_coarse, r.N_fine, r.sup_gap, r.semigroup_gap, r.runtime_ms) for r in rows],
    )


def read_csv_columns(path):
    """Header and float columns of a CSV written by this module."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = [[float(x) for x in line.strip().split(",")] for line in fh if line.strip()]
    return header, np.asarray(data, dtype=np.float64).reshape(len(data), len(header))
