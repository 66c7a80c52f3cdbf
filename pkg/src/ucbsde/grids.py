"""Graded time partitions of the effective working interval."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGrid
from .weights import Horizon, WeightFn


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing partition of [0, t_eff] with truncation metadata."""

    nodes: np.ndarray
    horizon_t: float = float("nan")
    truncated: bool = False

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise DegenerateGrid("grid needs at least two nodes")
        if nodes[0] != 0.0:
            raise DegenerateGrid("grid must start at 0")
        if np.any(np.diff(nodes) <= 0.0):
            raise DegenerateGrid("grid nodes must strictly increase")
        if np.isnan(self.horizon_t):
            object.__setattr__(self, "horizon_t", float(nodes[-1]))

    @property
    def t_eff(self) -> float:
        return float(self.nodes[-1])

    @property
    def deltas(self) -> np.ndarray:
        return np.diff(self.nodes)

    def __len__(self) -> int:
        return self.nodes.size

    @staticmethod
    def uniform(t_eff: float, steps: int, **meta) -> "TimeGrid":
        if steps < 1 or t_eff <= 0:
            raise DegenerateGrid("uniform grid needs steps >= 1 and t_eff > 0")
        return TimeGrid(np.linspace(0.0, t_eff, steps + 1), **meta)

    @staticmethod
    def graded(t_eff: float, steps: int, power: float = 2.0, **meta) -> "TimeGrid":
        """Nodes t_eff * (j / steps)**power, clustering toward t = 0."""
        if steps < 1 or t_eff <= 0 or power <= 0:
            raise DegenerateGrid("graded grid needs steps >= 1, t_eff > 0, power > 0")
        js = np.arange(steps + 1, dtype=float) / steps
        return TimeGrid(t_eff * js**power, **meta)

    @staticmethod
    def for_horizon(
        h: Horizon,
        steps: int,
        u: WeightFn | None = None,
        v: WeightFn | None = None,
        power: float = 2.0,
    ) -> "TimeGrid":
        """Grid over the horizon's effective interval.

        Grading toward t = 0 switches on when either weight declares a
        singularity there, otherwise the grid is uniform.
        """
        weights = [w for w in (u, v) if w is not None]
        squared = [v] if v is not None else []
        t_eff = h.effective(weights, squared)
        singular = any(w.singular_at_zero for w in weights)
        meta = dict(horizon_t=h.t, truncated=h.kind == "infinite")
        if singular:
            return TimeGrid.graded(t_eff, steps, power, **meta)
        return TimeGrid.uniform(t_eff, steps, **meta)
