"""File formats: dataset CSV, binary field snapshots, tidy trajectory CSV.

All writers are deterministic (repr-exact floats, fixed row order) and go
through an atomic temp-file replace, so a run never leaves partial outputs.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from typing import Iterable, Sequence

import numpy as np

from .grids import Grid
from .inference import DetectionDataset

SNAPSHOT_MAGIC = b"PLFS1\n"


class FormatError(ValueError):
    """Raised for malformed files."""


# ---------------------------------------------------------------------------
# atomic writes
# ---------------------------------------------------------------------------


def atomic_write_bytes(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _fmt(value) -> str:
    """Deterministic cell formatting: integers plain, floats via repr."""
    if isinstance(value, str):
        if "," in value or "\n" in value:
            raise FormatError(f"cell text may not contain separators: {value!r}")
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    f = float(value)
    if f.is_integer() and abs(f) < 1e15:
        return str(int(f))
    return repr(f)


def write_table_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# detection datasets
# ---------------------------------------------------------------------------


def write_dataset_csv(path: str, dataset: DetectionDataset) -> None:
    """Counts as (tau, j1, j2, j3, k, count) rows under a JSON header line.

    Zero-count cells are omitted; the header carries everything needed to
    rebuild the full array, and the round trip is bit-exact.
    """
    header = {
        "format": "paulilab-dataset-1",
        "repetitions": dataset.repetitions,
        "seed": dataset.seed,
        "grid": dataset.grid.descriptor(),
        "slices": dataset.slices,
    }
    lines = ["# " + json.dumps(header, sort_keys=True)]
    lines.append("tau,j1,j2,j3,k,count")
    counts = dataset.counts
    dim = dataset.grid.dim
    for index in np.argwhere(counts != 0):
        tau = index[0]
        voxel = [0, 0, 0]
        voxel[:dim] = list(index[1 : 1 + dim])
        k = 1 if index[-1] == 0 else -1
        value = counts[tuple(index)]
        lines.append(
            f"{tau},{voxel[0]},{voxel[1]},{voxel[2]},{k},{_fmt(value)}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_dataset_csv(path: str) -> DetectionDataset:
    with open(path, "r", encoding="utf-8") as handle:
        first = handle.readline()
        if not first.startswith("# "):
            raise FormatError("missing JSON header line")
        header = json.loads(first[2:])
        if header.get("format") != "paulilab-dataset-1":
            raise FormatError(f"unknown dataset format {header.get('format')!r}")
        column_line = handle.readline().strip()
        if column_line != "tau,j1,j2,j3,k,count":
            raise FormatError(f"unexpected column header {column_line!r}")
        grid = Grid.from_descriptor(header["grid"])
        counts = np.zeros((header["slices"],) + grid.shape + (2,))
        for line in handle:
            line = line.strip()
            if not line:
                continue
            tau_s, j1, j2, j3, k_s, count_s = line.split(",")
            voxel = tuple(int(j) for j in (j1, j2, j3))[: grid.dim]
            color = 0 if int(k_s) == 1 else 1
            counts[(int(tau_s),) + voxel + (color,)] = float(count_s)
    return DetectionDataset(grid, counts, header["repetitions"], seed=header["seed"])


# ---------------------------------------------------------------------------
# binary field snapshots
# ---------------------------------------------------------------------------


def write_field_snapshots(
    path: str,
    grid: Grid,
    dt: float,
    fields: dict[str, np.ndarray],
    metadata: dict | None = None,
) -> None:
    """Flat binary layout: magic, JSON header, then row-major arrays.

    Each entry of ``fields`` is a stack of snapshots (time axis first); the
    header records grid, dt, dtypes and shapes for exact reconstruction.
    """
    entries = []
    bodies = []
    count = None
    for name, stack in fields.items():
        arr = np.ascontiguousarray(stack)
        if count is None:
            count = arr.shape[0]
        elif arr.shape[0] != count:
            raise FormatError("all field stacks must have the same snapshot count")
        entries.append({"name": name, "dtype": str(arr.dtype), "shape": list(arr.shape)})
        bodies.append(arr.tobytes())
    header = {
        "format": "paulilab-snapshots-1",
        "grid": grid.descriptor(),
        "dt": dt,
        "snapshots": count or 0,
        "fields": entries,
        "metadata": metadata or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    out = bytearray()
    out += SNAPSHOT_MAGIC
    out += struct.pack("<Q", len(blob))
    out += blob
    for body in bodies:
        out += body
    atomic_write_bytes(path, bytes(out))


def read_field_snapshots(path: str):
    with open(path, "rb") as handle:
        magic = handle.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise FormatError("not a snapshot file")
        (length,) = struct.unpack("<Q", handle.read(8))
        header = json.loads(handle.read(length).decode("utf-8"))
        grid = Grid.from_descriptor(header["grid"])
        fields = {}
        for entry in header["fields"]:
            dtype = np.dtype(entry["dtype"])
            shape = tuple(entry["shape"])
            n_bytes = dtype.itemsize * int(np.prod(shape))
            raw = handle.read(n_bytes)
            if len(raw) != n_bytes:
                raise FormatError(f"truncated body for field {entry['name']!r}")
            fields[entry["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    return grid, header["dt"], fields, header["metadata"]


# ---------------------------------------------------------------------------
# trajectory writers
# ---------------------------------------------------------------------------


def write_pauli_trajectory_csv(path: str, traj, separation: np.ndarray | None = None) -> None:
    header = [
        "t", "norm", "x", "y", "z", "sx", "sy", "sz", "mass_plus", "mass_minus",
    ]
    columns = [
        traj.times, traj.norms,
        traj.positions[:, 0], traj.positions[:, 1], traj.positions[:, 2],
        traj.spins[:, 0], traj.spins[:, 1], traj.spins[:, 2],
        traj.color_masses[:, 0], traj.color_masses[:, 1],
    ]
    if separation is not None:
        header.append("separation")
        columns.append(separation)
    write_table_csv(path, header, zip(*columns))


def write_moment_trajectory_csv(path: str, traj) -> None:
    write_table_csv(
        path,
        ["t", "mx", "my", "mz"],
        zip(traj.times, traj.moments[:, 0], traj.moments[:, 1], traj.moments[:, 2]),
    )


def write_particle_trajectory_csv(path: str, traj) -> None:
    speed = np.linalg.norm(traj.velocities, axis=1)
    write_table_csv(
        path,
        ["t", "x", "y", "z", "vx", "vy", "vz", "speed"],
        zip(
            traj.times,
            traj.positions[:, 0], traj.positions[:, 1], traj.positions[:, 2],
            traj.velocities[:, 0], traj.velocities[:, 1], traj.velocities[:, 2],
            speed,
        ),
    )


def write_convergence_trace_csv(path: str, trace: np.ndarray) -> None:
    write_table_csv(
        path,
        ["iteration", "objective", "gradient_norm"],
        ((int(row[0]), row[1], row[2]) for row in trace),
    )
