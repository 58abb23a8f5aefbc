"""Reservoir mass balance, release saturation and hydropower conversion.

Units are SI throughout: storage in m3, flows in m3/s, one step is
``seconds_per_step`` seconds (86400 by default). Daily energy is reported in
GWh/day. The release decision ``u`` is saturated between the minimum and
maximum feasible releases, which are known only on a grid of (storage, Da
inflow) nodes and are queried by averaging the two nearest grid nodes under
a range-normalized Euclidean metric.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

import numpy as np

from .errors import ConfigError, ParseError

GRAVITY = 9.81  # m/s^2
WATER_DENSITY = 1000.0  # kg/m^3
SECONDS_PER_DAY = 86400.0

TRAJECTORY_COLUMNS = ("t", "s", "u", "r", "q_d", "h_hanoi", "energy")


def _readonly(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Curve:
    """Piecewise-linear curve with edge clamping outside the node range."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _readonly(self.x))
        object.__setattr__(self, "y", _readonly(self.y))
        if self.x.ndim != 1 or self.x.shape != self.y.shape or len(self.x) < 2:
            raise ConfigError("curve needs >= 2 nodes with matching x and y")
        if np.any(np.diff(self.x) <= 0):
            raise ConfigError("curve x nodes must be strictly increasing")

    def __call__(self, x):
        return np.interp(x, self.x, self.y)

    def is_strictly_increasing(self) -> bool:
        return bool(np.all(np.diff(self.y) > 0))


@dataclass(frozen=True)
class ReleaseTable:
    """Min/max feasible release on a (storage, Da inflow) grid.

    ``r_min`` and ``r_max`` have shape (len(s_nodes), len(q_nodes)). Queries
    average the two nearest nodes after normalizing each axis by its range;
    an exact node hit returns that node alone, and ties are broken by the
    lower flattened (storage-major) index.
    """

    s_nodes: np.ndarray
    q_nodes: np.ndarray
    r_min: np.ndarray
    r_max: np.ndarray

    def __post_init__(self):
        for name in ("s_nodes", "q_nodes", "r_min", "r_max"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        if len(self.s_nodes) < 1 or len(self.q_nodes) < 1:
            raise ConfigError("release table must have at least one node per axis")
        shape = (len(self.s_nodes), len(self.q_nodes))
        if self.r_min.shape != shape or self.r_max.shape != shape:
            raise ConfigError("release table values must have shape (len(s_nodes), len(q_nodes))")
        if np.any(np.diff(self.s_nodes) <= 0) or np.any(np.diff(self.q_nodes) <= 0):
            raise ConfigError("release table nodes must be strictly increasing")
        if np.any(self.r_min < 0) or np.any(self.r_min > self.r_max):
            raise ConfigError("release table must satisfy 0 <= r_min <= r_max at every node")
        # Flattened node coordinates, storage-major, for vectorized 2-NN queries.
        ss, qq = np.meshgrid(self.s_nodes, self.q_nodes, indexing="ij")
        object.__setattr__(self, "_node_s", _readonly(ss.ravel()))
        object.__setattr__(self, "_node_q", _readonly(qq.ravel()))
        object.__setattr__(self, "_node_rmin", _readonly(self.r_min.ravel()))
        object.__setattr__(self, "_node_rmax", _readonly(self.r_max.ravel()))
        s_range = float(self.s_nodes[-1] - self.s_nodes[0]) or 1.0
        q_range = float(self.q_nodes[-1] - self.q_nodes[0]) or 1.0
        object.__setattr__(self, "_s_range", s_range)
        object.__setattr__(self, "_q_range", q_range)

    def bounds(self, s, q_d):
        """Vectorized 2-nearest-node bounds lookup. Returns (r_min, r_max)."""
        s = np.asarray(s, dtype=float)
        q = np.asarray(q_d, dtype=float)
        scalar = s.ndim == 0 and q.ndim == 0
        s, q = np.broadcast_arrays(np.atleast_1d(s), np.atleast_1d(q))
        shape = s.shape
        ds = (s.ravel()[:, None] - self._node_s[None, :]) / self._s_range
        dq = (q.ravel()[:, None] - self._node_q[None, :]) / self._q_range
        d2 = ds * ds + dq * dq
        if d2.shape[1] == 1:
            lo = np.full(s.size, self._node_rmin[0])
            hi = np.full(s.size, self._node_rmax[0])
        else:
            order = np.argsort(d2, axis=1, kind="stable")
            first = order[:, 0]
            second = order[:, 1]
            rows = np.arange(d2.shape[0])
            exact = d2[rows, first] == 0.0
            lo = 0.5 * (self._node_rmin[first] + self._node_rmin[second])
            hi = 0.5 * (self._node_rmax[first] + self._node_rmax[second])
            lo[exact] = self._node_rmin[first[exact]]
            hi[exact] = self._node_rmax[first[exact]]
        lo = lo.reshape(shape)
        hi = hi.reshape(shape)
        if scalar:
            return float(lo[()]), float(hi[()])
        return lo, hi


@dataclass(frozen=True)
class ReservoirSpec:
    """Physical description of the reservoir and its powerhouse."""

    s_min: float
    s_max: float
    release_table: ReleaseTable
    level_of_storage: Curve
    tailwater_of_release: Curve
    q_turb_max: float
    eta: float | Curve = 0.9
    seconds_per_step: float = SECONDS_PER_DAY

    def __post_init__(self):
        if not self.s_min < self.s_max:
            raise ConfigError("s_min must be < s_max")
        if self.q_turb_max <= 0:
            raise ConfigError("q_turb_max must be > 0")
        if isinstance(self.eta, (int, float)):
            if not 0.0 < float(self.eta) <= 1.0:
                raise ConfigError("eta must lie in (0, 1]")
        if self.seconds_per_step <= 0:
            raise ConfigError("seconds_per_step must be > 0")
        if not self.level_of_storage.is_strictly_increasing():
            raise ConfigError("level_of_storage must be strictly increasing")

    def efficiency(self, head):
        if isinstance(self.eta, Curve):
            return self.eta(head)
        return self.eta


@dataclass(frozen=True)
class ReservoirState:
    """Time index (days) and stored volume (m3).

    Storage is nonnegative under feasible operation; simulators report,
    rather than silently repair, any step that drives it negative.
    """

    t: int
    s: float


def release_bounds(spec: ReservoirSpec, s, q_d):
    """Feasible release interval (gates fully closed / fully open)."""
    return spec.release_table.bounds(s, q_d)


def apply_release(spec: ReservoirSpec, s, u, q_d):
    """Saturate the release decision to the feasible interval."""
    lo, hi = release_bounds(spec, s, q_d)
    return np.clip(u, lo, hi)


def step(spec: ReservoirSpec, state: ReservoirState, u: float, q_d: float):
    """One mass-balance step. Returns (next_state, actual_release)."""
    r = float(apply_release(spec, state.s, u, q_d))
    s_next = state.s + (q_d - r) * spec.seconds_per_step
    return ReservoirState(t=state.t + 1, s=s_next), r


def hydraulic_head(spec: ReservoirSpec, s, r):
    """Reservoir level minus tailwater level, floored at zero (m)."""
    return np.maximum(spec.level_of_storage(s) - spec.tailwater_of_release(r), 0.0)


def energy_production(spec: ReservoirSpec, head, r):
    """Daily energy (GWh/day) from net head and release.

    Flow beyond ``q_turb_max`` spills past the turbines. The instantaneous
    power is eta * g * rho_w * head * q_turb * 1e-6 (MW); a day of it is
    MW * 24 / 1000 GWh.
    """
    q_turb = np.minimum(r, spec.q_turb_max)
    power_mw = spec.efficiency(head) * GRAVITY * WATER_DENSITY * head * q_turb * 1e-6
    return power_mw * 24.0 / 1000.0


@dataclass
class Trajectory:
    """Per-step records of a closed or open loop run.

    Index ``k`` holds: time index ``t[k]``, start-of-step storage ``s[k]``,
    release decision ``u[k]``, realized release and Da inflow over the step
    (``r[k]``, ``q_d[k]``), the downstream level reached by the step
    (``h_hanoi[k]``, cm) and the step's energy (``energy[k]``, GWh/day).
    ``s_end`` is the storage after the final step.
    """

    t: np.ndarray
    s: np.ndarray
    u: np.ndarray
    r: np.ndarray
    q_d: np.ndarray
    h_hanoi: np.ndarray
    energy: np.ndarray
    s_end: float
    seconds_per_step: float = SECONDS_PER_DAY

    def __post_init__(self):
        lengths = {len(self.t), len(self.s), len(self.u), len(self.r),
                   len(self.q_d), len(self.h_hanoi), len(self.energy)}
        if lengths != {len(self.t)} or len(self.t) < 1:
            raise ConfigError("trajectory series must have equal length >= 1")

    def __len__(self) -> int:
        return len(self.t)

    def storage_series(self) -> np.ndarray:
        """Storage at every step boundary, length len(self) + 1."""
        return np.concatenate([self.s, [self.s_end]])

    def mass_balance_residual(self) -> float:
        """Max |s_{k+1} - s_k - (q_d - r) * dt| over all steps."""
        s_all = self.storage_series()
        res = (s_all[1:] - s_all[:-1]) - (self.q_d - self.r) * self.seconds_per_step
        return float(np.max(np.abs(res)))


def save_trajectory(traj: Trajectory, dest: str | Path | IO[str]) -> None:
    """CSV form: header ``t,s,u,r,q_d,h_hanoi,energy``."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(TRAJECTORY_COLUMNS)
    for k in range(len(traj)):
        writer.writerow([int(traj.t[k])] +
                        [f"{v:.12g}" for v in (traj.s[k], traj.u[k], traj.r[k],
                                               traj.q_d[k], traj.h_hanoi[k], traj.energy[k])])
    text = buf.getvalue()
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        from .fileio import atomic_write_text

        atomic_write_text(dest, text)


def load_trajectory(source: str | Path | IO[str],
                    seconds_per_step: float = SECONDS_PER_DAY) -> Trajectory:
    if hasattr(source, "read"):
        return _parse_trajectory(source, seconds_per_step)
    with open(source, newline="", encoding="utf-8") as fh:
        return _parse_trajectory(fh, seconds_per_step)


def _parse_trajectory(stream: IO[str], seconds_per_step: float) -> Trajectory:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != list(TRAJECTORY_COLUMNS):
        raise ParseError(f"line 1: expected header {','.join(TRAJECTORY_COLUMNS)}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(TRAJECTORY_COLUMNS):
            raise ParseError(f"line {lineno}: expected {len(TRAJECTORY_COLUMNS)} columns")
        try:
            rows.append([float(c) for c in row])
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric cell") from None
    if not rows:
        raise ParseError("line 2: trajectory has no data rows")
    arr = np.array(rows)
    s_end = arr[-1, 1] + (arr[-1, 4] - arr[-1, 3]) * seconds_per_step
    return Trajectory(t=arr[:, 0], s=arr[:, 1], u=arr[:, 2], r=arr[:, 3],
                      q_d=arr[:, 4], h_hanoi=arr[:, 5], energy=arr[:, 6],
                      s_end=float(s_end), seconds_per_step=seconds_per_step)
