"""Hydropower and flood objectives, scalarization and Pareto filtering.

The two scores of a run are the daily average energy production J_H
(GWh/day, maximized) and the daily average squared excess of the Hanoi
level over the flood threshold J_F (cm^2/day, minimized). A weight
``alpha`` in [0, 1] collapses them into the single cost
``-alpha * J_H + (1 - alpha) * J_F``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .reservoir import Trajectory

FLOOD_THRESHOLD_CM = 950.0


@dataclass(frozen=True)
class ObjectivesReport:
    j_h: float
    j_f: float
    horizon: int

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.j_h < 0 or self.j_f < 0:
            raise ValueError("objectives must be nonnegative")

    def to_json(self) -> str:
        return json.dumps({"J_H": self.j_h, "J_F": self.j_f, "horizon": self.horizon})

    @classmethod
    def from_json(cls, text: str) -> "ObjectivesReport":
        obj = json.loads(text)
        return cls(j_h=obj["J_H"], j_f=obj["J_F"], horizon=obj["horizon"])


def hydropower_objective(traj: Trajectory) -> float:
    """Daily average energy production over the trajectory (GWh/day)."""
    if len(traj) < 1:
        raise ValueError("empty trajectory")
    return float(np.mean(traj.energy))


def flood_objective(traj: Trajectory, h_bar: float = FLOOD_THRESHOLD_CM) -> float:
    """Daily average squared excess level over the threshold (cm^2/day)."""
    if len(traj) < 1:
        raise ValueError("empty trajectory")
    excess = np.maximum(traj.h_hanoi - h_bar, 0.0)
    return float(np.mean(excess * excess))


def report_objectives(traj: Trajectory, h_bar: float = FLOOD_THRESHOLD_CM) -> ObjectivesReport:
    return ObjectivesReport(j_h=hydropower_objective(traj),
                            j_f=flood_objective(traj, h_bar),
                            horizon=len(traj))


def scalarize(j_h: float, j_f: float, alpha: float) -> float:
    """Weighted cost ``-alpha * J_H + (1 - alpha) * J_F``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return -alpha * j_h + (1.0 - alpha) * j_f


def stage_cost(energy, level, alpha: float, h_bar: float = FLOOD_THRESHOLD_CM):
    """Scalarized instantaneous cost of one step.

    Averaging this over a trajectory reproduces scalarize(J_H, J_F, alpha).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    excess = np.maximum(np.asarray(level, dtype=float) - h_bar, 0.0)
    return -alpha * np.asarray(energy, dtype=float) + (1.0 - alpha) * excess * excess


def pareto_filter(points) -> list[int]:
    """Indices of the non-dominated points of a (J_H, J_F) cloud.

    A point dominates another when its J_H is no smaller and its J_F no
    larger, with at least one strict inequality. Exact duplicates do not
    dominate each other and are all retained. Runs a sort-and-sweep over
    J_H groups in O(n log n).
    """
    pts = [(float(jh), float(jf)) for jh, jf in points]
    if not pts:
        raise ValueError("empty point list")
    groups: dict[float, list[int]] = {}
    for i, (jh, _) in enumerate(pts):
        groups.setdefault(jh, []).append(i)
    keep: list[int] = []
    best_above = np.inf  # min J_F among points with strictly larger J_H
    for jh in sorted(groups, reverse=True):
        group = groups[jh]
        group_min = min(pts[i][1] for i in group)
        for i in group:
            # survives the group (no strictly smaller J_F at equal J_H) and
            # every higher-J_H point has strictly larger J_F
            if pts[i][1] == group_min and pts[i][1] < best_above:
                keep.append(i)
        best_above = min(best_above, group_min)
    return sorted(keep)
