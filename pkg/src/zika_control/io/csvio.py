"""Per-node trajectory export: states, controls and costates, 17 significant digits."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..model import STATE_NAMES

HEADER = ("t", *STATE_NAMES, "u1", "u2", *(f"lambda{i}" for i in range(1, 9)))


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_csv(result, path) -> None:
    """Write one row per grid node; identical inputs give identical bytes."""
    sol = result.solution
    if sol is None:
        raise ValueError(f"scenario {result.label!r} has no solution to export ({result.error})")
    table = np.column_stack([sol.times, sol.states, sol.controls, sol.adjoints])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        for row in table:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path) -> dict:
    """Parse a file written by :func:`write_csv` into arrays keyed by block."""
    with open(path, encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != HEADER:
            raise ValueError(f"unexpected header in {path}: {header}")
        data = np.array([[float(v) for v in row] for row in reader])
    return {
        "times": data[:, 0],
        "states": data[:, 1:9],
        "controls": data[:, 9:11],
        "adjoints": data[:, 11:19],
    }
