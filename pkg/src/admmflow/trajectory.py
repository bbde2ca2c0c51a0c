"""Time-stamped solver and flow trajectories, with CSV export/import."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Trajectory", "load_trajectory_csv"]

TRUNCATION_MARKER = "truncated"


@dataclass
class Trajectory:
    """Sequence of sampled states with per-sample objective value and gap.

    ``t`` and ``V`` are always present. Discrete runs carry ``k`` and
    ``primal_residual``; flow runs carry state samples ``X`` plus, where
    defined, velocities ``Xdot`` and the Hamiltonian. ``meta`` holds run
    parameters (method, rho, step size, wall times) and never enters CSVs.
    """

    t: np.ndarray
    V: np.ndarray
    v_gap: np.ndarray
    X: np.ndarray | None = None
    Xdot: np.ndarray | None = None
    hamiltonian: np.ndarray | None = None
    k: np.ndarray | None = None
    primal_residual: np.ndarray | None = None
    v_star: float | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.t.shape[0])

    def x_norms(self):
        if self.X is None:
            raise ValueError("trajectory carries no state samples")
        return np.linalg.norm(self.X, axis=1)

    def xdot_norms(self):
        if self.Xdot is None:
            raise ValueError("trajectory carries no velocity samples")
        return np.linalg.norm(self.Xdot, axis=1)

    def _columns(self):
        # Discrete schema: k,t,V_gap,primal_residual,x_norm
        # Flow schema:     t,V_gap[,hamiltonian],x_norm[,xdot_norm]
        if self.k is not None:
            cols = [("k", self.k), ("t", self.t), ("V_gap", self.v_gap)]
            cols.append(("primal_residual", self.primal_residual))
            cols.append(("x_norm", self.x_norms()))
            return cols
        cols = [("t", self.t), ("V_gap", self.v_gap)]
        if self.hamiltonian is not None:
            cols.append(("hamiltonian", self.hamiltonian))
        cols.append(("x_norm", self.x_norms()))
        if self.Xdot is not None:
            cols.append(("xdot_norm", self.xdot_norms()))
        return cols

    def to_csv(self, path, truncation_note=None):
        """Write the trajectory; floats use repr so files round-trip exactly.

        ``truncation_note`` appends a final marker row (first cell
        ``truncated``, remaining cells the note) for runs cut short.
        """
        cols = self._columns()
        names = [name for name, _ in cols]
        arrays = [np.asarray(arr) for _, arr in cols]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(names)
            for i in range(len(self)):
                row = []
                for name, arr in zip(names, arrays):
                    if name == "k":
                        row.append(str(int(arr[i])))
                    else:
                        row.append(repr(float(arr[i])))
                writer.writerow(row)
            if truncation_note is not None:
                writer.writerow(
                    [TRUNCATION_MARKER, str(truncation_note)] + [""] * (len(names) - 2)
                )


def load_trajectory_csv(path):
    """Read a trajectory CSV into a dict of float arrays keyed by column name.

    Rows whose first cell is not numeric (e.g. a truncation marker) are
    skipped.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for row in reader:
            if not row:
                continue
            try:
                float(row[0])
            except ValueError:
                continue
            rows.append([float(cell) for cell in row])
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, j] for j, name in enumerate(header)}
