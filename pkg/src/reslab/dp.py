"""Backward dynamic programming on a (time, storage) grid.

Two solvers share one vectorized stage kernel:

* ``solve_ddp`` runs a finite-horizon backward recursion along a known
  disturbance trace (terminal cost zero).
* ``solve_sdp`` runs periodic value iteration over the 365-day cycle with a
  per-day scenario ensemble. Total cost grows without bound over an infinite
  horizon, so after every annual sweep the table is re-anchored at the
  (day 0, first node) entry; convergence is declared when the max-norm
  change of the anchored table over one full period drops below ``tol``.
  Anchoring shifts every value by the same constant and leaves the argmin,
  and hence the policy, untouched.

Cost-to-go between storage nodes is piecewise-linear interpolated; next
states outside the grid are clamped to the boundary node and counted as
diagnostics. Off-grid policy evaluation uses the nearest storage node, since
controls are grid atoms. Ties in the stage argmin resolve to the lowest
control index.

The stage flood term evaluates the routing surrogate in its memoryless form
(lag and attenuation dropped): the grid state carries no routing memory, so
the stage cost uses the rating curve applied to the same-day total flow.
Simulation afterwards uses the full routing model.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ConvergenceError
from .fileio import read_json, write_json
from .hydrology import DAYS_PER_YEAR, DisturbanceEnsemble, HydrologyTrace
from .objectives import FLOOD_THRESHOLD_CM, stage_cost
from .reservoir import (ReservoirSpec, Trajectory, apply_release,
                        energy_production, hydraulic_head)
from .routing import RoutingModel


def _readonly(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GridSpec:
    """Storage and control discretization. Controls are release decisions (m3/s)."""

    s_nodes: np.ndarray
    u_nodes: np.ndarray
    period: int = DAYS_PER_YEAR

    def __post_init__(self):
        object.__setattr__(self, "s_nodes", _readonly(self.s_nodes))
        object.__setattr__(self, "u_nodes", _readonly(self.u_nodes))
        if len(self.s_nodes) < 2 or len(self.u_nodes) < 2:
            raise ConfigError("grid needs at least 2 storage nodes and 2 control nodes")
        if np.any(np.diff(self.s_nodes) <= 0) or np.any(np.diff(self.u_nodes) <= 0):
            raise ConfigError("grid nodes must be strictly increasing")
        if self.u_nodes[0] < 0:
            raise ConfigError("control nodes must be nonnegative")
        if self.period < 1:
            raise ConfigError("period must be >= 1")

    @property
    def n_storage(self) -> int:
        return len(self.s_nodes)

    @property
    def n_controls(self) -> int:
        return len(self.u_nodes)

    def nearest_storage_node(self, s: float) -> int:
        mids = 0.5 * (self.s_nodes[1:] + self.s_nodes[:-1])
        return int(np.searchsorted(mids, s))


@dataclass
class BellmanTable:
    """Cost-to-go values per stage and storage node, plus solve metadata."""

    values: np.ndarray  # (n_stages, n_storage); periodic tables use n_stages = period
    grid: GridSpec
    alpha: float
    periodic: bool
    residual: float = 0.0
    sweeps: int = 0
    clamp_events: int = 0

    def to_dict(self) -> dict:
        return {
            "values": self.values.tolist(),
            "s_nodes": self.grid.s_nodes.tolist(),
            "u_nodes": self.grid.u_nodes.tolist(),
            "period": self.grid.period,
            "alpha": self.alpha,
            "periodic": self.periodic,
            "residual": self.residual,
            "sweeps": self.sweeps,
            "clamp_events": self.clamp_events,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "BellmanTable":
        grid = GridSpec(s_nodes=np.array(obj["s_nodes"]), u_nodes=np.array(obj["u_nodes"]),
                        period=int(obj["period"]))
        return cls(values=np.array(obj["values"]), grid=grid, alpha=float(obj["alpha"]),
                   periodic=bool(obj["periodic"]), residual=float(obj["residual"]),
                   sweeps=int(obj["sweeps"]), clamp_events=int(obj["clamp_events"]))

    def save(self, path: str | Path) -> None:
        write_json(path, self.to_dict())

    @classmethod
    def load(cls, path: str | Path) -> "BellmanTable":
        return cls.from_dict(read_json(path))


@dataclass
class Policy:
    """Periodic (day-of-year) or finite-horizon table of optimal controls."""

    mu: np.ndarray  # (n_stages, n_storage) control values, each one a grid atom
    grid: GridSpec
    periodic: bool

    def control_at(self, stage: int, s: float) -> float:
        if self.periodic:
            stage = stage % len(self.mu)
        elif not 0 <= stage < len(self.mu):
            raise IndexError(f"stage {stage} outside finite policy horizon {len(self.mu)}")
        return float(self.mu[stage, self.grid.nearest_storage_node(s)])

    def to_dict(self) -> dict:
        return {
            "mu": self.mu.tolist(),
            "s_nodes": self.grid.s_nodes.tolist(),
            "u_nodes": self.grid.u_nodes.tolist(),
            "period": self.grid.period,
            "periodic": self.periodic,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Policy":
        grid = GridSpec(s_nodes=np.array(obj["s_nodes"]), u_nodes=np.array(obj["u_nodes"]),
                        period=int(obj["period"]))
        return cls(mu=np.array(obj["mu"]), grid=grid, periodic=bool(obj["periodic"]))

    def save(self, path: str | Path) -> None:
        write_json(path, self.to_dict())

    @classmethod
    def load(cls, path: str | Path) -> "Policy":
        return cls.from_dict(read_json(path))


class _StageKernel:
    """Precomputed per-day quantities for the Bellman stage minimization."""

    def __init__(self, spec: ReservoirSpec, routing: RoutingModel, grid: GridSpec,
                 alpha: float, h_bar: float):
        self.spec = spec
        self.routing = routing
        self.grid = grid
        self.alpha = alpha
        self.h_bar = h_bar
        self.dt = spec.seconds_per_step
        self.level_at_nodes = spec.level_of_storage(grid.s_nodes)  # (n,)
        self._bounds_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def bounds_for(self, key: int, q_d: np.ndarray):
        """Release bounds at every (storage node, scenario), cached per day key."""
        cached = self._bounds_cache.get(key)
        if cached is None:
            n = self.grid.n_storage
            k = len(q_d)
            s_q = np.broadcast_to(self.grid.s_nodes[:, None], (n, k))
            q_q = np.broadcast_to(q_d[None, :], (n, k))
            lo, hi = self.spec.release_table.bounds(s_q, q_q)
            cached = (lo, hi)
            self._bounds_cache[key] = cached
        return cached

    def minimize(self, key: int, flows: np.ndarray, weights: np.ndarray,
                 next_values: np.ndarray):
        """One Bellman stage. Returns (values, controls, n_clamped).

        ``flows`` is (K, 3) with columns (q_d, q_t, q_l); ``next_values`` is
        the cost-to-go at the following stage on the storage nodes.
        """
        grid = self.grid
        q_d, q_t, q_l = flows[:, 0], flows[:, 1], flows[:, 2]
        lo, hi = self.bounds_for(key, q_d)  # (n, K)
        u = grid.u_nodes[None, :, None]  # (1, m, 1)
        r = np.clip(u, lo[:, None, :], hi[:, None, :])  # (n, m, K)
        s_next = grid.s_nodes[:, None, None] + (q_d[None, None, :] - r) * self.dt
        n_clamped = int(np.count_nonzero((s_next < grid.s_nodes[0]) |
                                         (s_next > grid.s_nodes[-1])))
        head = np.maximum(self.level_at_nodes[:, None, None] -
                          self.spec.tailwater_of_release(r), 0.0)
        energy = energy_production(self.spec, head, r)
        level = self.routing.stage_level(r + (q_t + q_l)[None, None, :])
        g = stage_cost(energy, level, self.alpha, self.h_bar)
        future = np.interp(s_next.ravel(), grid.s_nodes, next_values).reshape(s_next.shape)
        expected = np.einsum("nmk,k->nm", g + future, weights)
        best = np.argmin(expected, axis=1)  # first minimum: lowest control index
        rows = np.arange(grid.n_storage)
        return expected[rows, best], grid.u_nodes[best], n_clamped


def _trace_stage_flows(trace: HydrologyTrace, t: int) -> tuple[np.ndarray, np.ndarray]:
    flows = np.array([[trace.q_d[t], trace.q_t[t], trace.q_l[t]]])
    return flows, np.array([1.0])


def solve_ddp(spec: ReservoirSpec, routing: RoutingModel, trace: HydrologyTrace,
              grid: GridSpec, alpha: float,
              h_bar: float = FLOOD_THRESHOLD_CM) -> tuple[BellmanTable, Policy]:
    """Finite-horizon backward recursion along a known disturbance trace."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError("alpha must lie in [0, 1]")
    horizon = len(trace)
    kernel = _StageKernel(spec, routing, grid, alpha, h_bar)
    values = np.zeros((horizon + 1, grid.n_storage))
    mu = np.zeros((horizon, grid.n_storage))
    clamped = 0
    for t in range(horizon - 1, -1, -1):
        flows, weights = _trace_stage_flows(trace, t)
        # Cache key is the day of year: bounds depend on (s, q_d) which repeat
        # only when the trace does, so key on t for finite traces.
        values[t], mu[t], n_cl = kernel.minimize(t, flows, weights, values[t + 1])
        clamped += n_cl
    table = BellmanTable(values=values, grid=grid, alpha=alpha, periodic=False,
                         residual=0.0, sweeps=1, clamp_events=clamped)
    policy = Policy(mu=mu, grid=grid, periodic=False)
    return table, policy


def solve_sdp(spec: ReservoirSpec, routing: RoutingModel, ensemble: DisturbanceEnsemble,
              grid: GridSpec, alpha: float, tol: float | None = None,
              max_sweeps: int = 200,
              h_bar: float = FLOOD_THRESHOLD_CM) -> tuple[BellmanTable, Policy]:
    """Periodic value iteration over the annual cycle.

    ``tol`` is an absolute threshold on the max-norm change of the anchored
    table per sweep; when None it defaults to 1e-6 times the value scale
    observed after the first sweep.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError("alpha must lie in [0, 1]")
    if tol is not None and tol <= 0:
        raise ConfigError("tol must be > 0")
    period = grid.period
    if ensemble.flows.shape[0] != period:
        raise ConfigError("ensemble must cover every day of the period")
    kernel = _StageKernel(spec, routing, grid, alpha, h_bar)
    values = np.zeros((period, grid.n_storage))
    clamped = 0
    residual = np.inf
    sweeps = 0
    for sweep in range(1, max_sweeps + 1):
        previous = values.copy()
        for d in range(period - 1, -1, -1):
            nxt = values[(d + 1) % period]
            values[d], _, n_cl = kernel.minimize(d, ensemble.flows[d], ensemble.weights[d], nxt)
            clamped += n_cl
        values -= values[0, 0]  # re-anchor: total cost grows, relative values converge
        residual = float(np.max(np.abs(values - previous)))
        sweeps = sweep
        if tol is None:
            tol = 1e-6 * max(float(np.max(np.abs(values))), 1.0)
        if residual < tol:
            break
    else:
        raise ConvergenceError(
            f"periodic value iteration did not converge in {max_sweeps} sweeps "
            f"(last residual {residual:.3e}, tol {tol:.3e})", residual)
    table = BellmanTable(values=values, grid=grid, alpha=alpha, periodic=True,
                         residual=residual, sweeps=sweeps, clamp_events=clamped)
    policy = extract_policy(table, spec, routing, ensemble, h_bar=h_bar)
    return table, policy


def extract_policy(table: BellmanTable, spec: ReservoirSpec, routing: RoutingModel,
                   disturbances: DisturbanceEnsemble | HydrologyTrace,
                   h_bar: float = FLOOD_THRESHOLD_CM) -> Policy:
    """Argmin pass over a stored table. Pure: never mutates the table."""
    grid = table.grid
    kernel = _StageKernel(spec, routing, grid, table.alpha, h_bar)
    if table.periodic:
        if not isinstance(disturbances, DisturbanceEnsemble):
            raise ConfigError("periodic tables need a DisturbanceEnsemble")
        period = grid.period
        mu = np.zeros((period, grid.n_storage))
        for d in range(period):
            nxt = table.values[(d + 1) % period]
            _, mu[d], _ = kernel.minimize(d, disturbances.flows[d], disturbances.weights[d], nxt)
        return Policy(mu=mu, grid=grid, periodic=True)
    if not isinstance(disturbances, HydrologyTrace):
        raise ConfigError("finite tables need the HydrologyTrace they were solved on")
    horizon = table.values.shape[0] - 1
    if len(disturbances) < horizon:
        raise ConfigError("trace shorter than the table horizon")
    mu = np.zeros((horizon, grid.n_storage))
    for t in range(horizon):
        flows, weights = _trace_stage_flows(disturbances, t)
        _, mu[t], _ = kernel.minimize(t, flows, weights, table.values[t + 1])
    return Policy(mu=mu, grid=grid, periodic=False)


@dataclass
class SimulationDiagnostics:
    negative_storage_steps: int = 0
    saturated_steps: int = 0


def simulate_policy(policy: Policy, spec: ReservoirSpec, routing: RoutingModel,
                    trace: HydrologyTrace, s0: float | None = None,
                    diagnostics: SimulationDiagnostics | None = None) -> Trajectory:
    """Closed-loop forward run of a policy over a trace.

    Periodic policies are indexed by the trace's day of year; finite-horizon
    policies by the step index (the trace must not outrun the horizon).
    """
    n = len(trace)
    if n < 1:
        raise ConfigError("trace must have length >= 1")
    s = float(s0) if s0 is not None else 0.5 * (policy.grid.s_nodes[0] + policy.grid.s_nodes[-1])
    dt = spec.seconds_per_step
    s_arr = np.empty(n)
    u_arr = np.empty(n)
    r_arr = np.empty(n)
    for t in range(n):
        stage = trace.day_of_year(t) if policy.periodic else t
        u = policy.control_at(stage, s)
        r = float(apply_release(spec, s, u, trace.q_d[t]))
        s_arr[t] = s
        u_arr[t] = u
        r_arr[t] = r
        s = s + (trace.q_d[t] - r) * dt
        if diagnostics is not None:
            if s < 0:
                diagnostics.negative_storage_steps += 1
            if r != u:
                diagnostics.saturated_steps += 1
    h = routing.level_series(r_arr, trace.q_t, trace.q_l)
    head = hydraulic_head(spec, s_arr, r_arr)
    energy = energy_production(spec, head, r_arr)
    return Trajectory(t=np.arange(n, dtype=float), s=s_arr, u=u_arr, r=r_arr,
                      q_d=np.array(trace.q_d), h_hanoi=h, energy=energy,
                      s_end=s, seconds_per_step=dt)
