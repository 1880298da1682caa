"""CSV and JSON emission of trajectories, lossless for binary64 values."""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from .diagnostics import RECORD_FIELDS, Checkpoint, DiagnosticsRecord, Trajectory

HEADER = ",".join(RECORD_FIELDS)


def fmt(x) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def write_records_csv(traj: Trajectory, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(HEADER + "\n")
        for r in traj.records:
            fh.write(",".join([*(fmt(getattr(r, k)) for k in RECORD_FIELDS[:-1]),
                               str(int(r.newton_iters))]) + "\n")


def read_records_csv(path, spec=None) -> Trajectory:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if ",".join(header) != HEADER:
            raise ValueError(f"unexpected CSV header {header!r}")
        traj = Trajectory(spec=spec)
        for row in reader:
            traj.append(DiagnosticsRecord(*(float(v) for v in row[:-1]), int(row[-1])))
    return traj


def checkpoint_name(index: int) -> str:
    return f"checkpoint_{index:05d}.csv"


def write_checkpoints(traj: Trajectory, directory) -> list:
    """One two-column ``x,u`` file per checkpoint, numbered in time order.

    An index file ``checkpoints.csv`` maps each number to its time, front
    position and record index.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    with (directory / "checkpoints.csv").open("w") as idx:
        idx.write("index,t,s,record\n")
        for i, cp in enumerate(traj.checkpoints):
            name = checkpoint_name(i)
            with (directory / name).open("w") as fh:
                fh.write("x,u\n")
                for x, u in zip(cp.x, cp.u):
                    fh.write(f"{fmt(x)},{fmt(u)}\n")
            idx.write(f"{i},{fmt(cp.t)},{fmt(cp.s)},{cp.index}\n")
            names.append(name)
    return names


def read_checkpoints(directory) -> list:
    directory = Path(directory)
    out = []
    with (directory / "checkpoints.csv").open() as idx:
        for row in csv.DictReader(idx):
            data = np.loadtxt(directory / checkpoint_name(int(row["index"])), delimiter=",",
                              skiprows=1, ndmin=2)
            out.append(Checkpoint(float(row["t"]), float(row["s"]), data[:, 0], data[:, 1],
                                  int(row["record"])))
    return out


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(obj, path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=False)
        fh.write("\n")
    os.replace(tmp, path)


def ensure_writable(path) -> None:
    """Raise ``OSError`` unless ``path`` (a file) can be created or overwritten."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    existed = path.exists()
    with path.open("a"):
        pass
    if not existed:
        path.unlink()
