"""Typed loaders for the solver's CSV artifacts."""

import csv
from pathlib import Path

import numpy as np

#: columns every metrics.csv must provide (the run may add more)
METRICS_REQUIRED = ("step", "T", "dt_old", "dt_new", "dt_adm", "reruns",
                    "troubled", "q_reads_per_cell", "bus_reads", "bus_writes",
                    "update_writes")

CONVERGENCE_REQUIRED = ("L", "h", "error", "order")

TRACE_REQUIRED = ("sweep", "task", "entity_kind", "entity_id", "step")

_INT_COLUMNS = {"step", "reruns", "troubled", "bus_reads", "bus_writes",
                "update_writes", "L", "sweep", "entity_id"}


class MetricsFrame:
    """Parsed rows of metrics.csv with typed column arrays."""

    def __init__(self, columns):
        self.columns = columns

    def __getitem__(self, name):
        return self.columns[name]

    @property
    def n_steps(self):
        return len(self.columns["step"])

    @classmethod
    def from_csv(cls, path):
        columns = _load(path, METRICS_REQUIRED)
        if len(columns["step"]) == 0:
            raise ValueError(f"{path}: metrics file contains no steps")
        return cls(columns)

    def total_bus_doubles(self):
        return int(self["bus_reads"].sum() + self["bus_writes"].sum())

    def fingerprint(self):
        """Per-step committed solution volume; equal for runs of matching
        (d, p, m, grid) regardless of scheduler mode.  The minimum skips
        the first row, whose deltas include the pipelined priming sweep."""
        return int(self["update_writes"].min())


def _load(path, required):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        rows = list(reader)
    columns = {}
    for name in header:
        values = [row[name] for row in rows]
        if name in ("task", "entity_kind"):
            columns[name] = np.array(values, dtype=object)
        elif name in _INT_COLUMNS:
            columns[name] = np.array([int(v) for v in values], dtype=np.int64)
        else:
            columns[name] = np.array([float(v) for v in values])
    return columns


def load_convergence(path):
    """Rows of a convergence.csv as a dict of arrays (order of the first
    level is NaN by construction)."""
    columns = _load(path, CONVERGENCE_REQUIRED)
    return columns


def load_trace(path):
    columns = _load(path, TRACE_REQUIRED)
    return columns
