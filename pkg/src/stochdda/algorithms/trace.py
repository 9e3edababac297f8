"""Per-round metric records shared by every simulated algorithm."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Columns every trace carries; quantities an algorithm does not define stay NaN.
COLUMNS = (
    "t",
    "log_A",
    "sq_dist",
    "rse",
    "obj_gap_ybar",
    "obj_gap_mean_x",
    "consensus_residual_s",
    "consensus_residual_z",
    "conservation_s",
    "conservation_z",
    "lemma5_slack",
    "dev_xtilde_ytilde",
    "dev_xtilde_xstar",
    "gap_xtilde_max",
    "schedule_identity",
)


class Recorder:
    def __init__(self):
        self._rows = []

    def add(self, **values):
        self._rows.append(values)

    def columns(self):
        out = {}
        for name in COLUMNS:
            out[name] = np.array([r.get(name, np.nan) for r in self._rows], dtype=float)
        return out


@dataclass
class RunTrace:
    """Metrics for rounds ``t = 0..T`` plus final states and run metadata.

    ``rse`` is filled only when a reference solution was supplied. Full iterate
    histories are kept only on request (``x_history`` has shape (T+1, n, m)).
    """

    algorithm: str
    columns: dict
    meta: dict = field(default_factory=dict)
    x_final: np.ndarray | None = None
    x_history: np.ndarray | None = None
    y_history: np.ndarray | None = None
    ytilde_final: np.ndarray | None = None
    xtilde_final: np.ndarray | None = None

    def __getitem__(self, name):
        return self.columns[name]

    @property
    def T(self):
        return len(self.columns["t"]) - 1

    @property
    def rounds(self):
        return self.columns["t"].astype(int)
