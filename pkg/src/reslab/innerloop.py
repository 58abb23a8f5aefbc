"""Closed inner loop: PID storage tracking around the reservoir.

``simulate_inner_loop`` runs the real loop, release saturation included.
``linearized_inner_loop`` builds the linear state-space model of the loop
obtained by neglecting the saturation (release equals decision), which the
outer predictive controller uses as its prediction model:

    s(z) = z^-1 s(z) + Ts (q(z) - z^-1 u(z))
    u(z) = C(z) (s_ref(z) - s(z))

Matrices are stored in scaled units (storage over ``scaling.storage``, flows
over ``scaling.flow``) to keep the numerics tame; the public rollout API
accepts and returns physical units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .hydrology import HydrologyTrace
from .reservoir import (ReservoirSpec, Trajectory, energy_production,
                        hydraulic_head, release_bounds)
from .routing import RoutingModel
from .vrft import LinearSISOModel, PIDParams


@dataclass(frozen=True)
class LoopScaling:
    """Normalization constants: storage (m3) and flow (m3/s)."""

    storage: float
    flow: float

    def __post_init__(self):
        if self.storage <= 0 or self.flow <= 0:
            raise ConfigError("scaling constants must be > 0")


@dataclass(frozen=True)
class InnerLoopConfig:
    pid: PIDParams
    reference_model: LinearSISOModel
    scaling: LoopScaling
    anti_windup: bool = True


@dataclass(frozen=True)
class StateSpaceModel:
    """Scaled realization of the saturation-free loop.

    State holds the scaled storage first, then the PID integrator and the
    previous-error memory when the corresponding gains are nonzero (the
    realization is kept minimal). Inputs are (scaled reference, scaled
    inflow); outputs are (scaled storage, scaled release decision).
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    scaling: LoopScaling
    pid: PIDParams
    seconds_per_step: float
    state_labels: tuple[str, ...]

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    def to_dict(self) -> dict:
        return {
            "A": self.a.tolist(), "B": self.b.tolist(),
            "C": self.c.tolist(), "D": self.d.tolist(),
            "scaling": {"storage": self.scaling.storage, "flow": self.scaling.flow},
            "pid": list(self.pid.as_array()),
            "seconds_per_step": self.seconds_per_step,
            "state_labels": list(self.state_labels),
        }


def linearized_inner_loop(pid: PIDParams, scaling: LoopScaling,
                          seconds_per_step: float = 86400.0) -> StateSpaceModel:
    """Assemble the prediction model from the PID gains and scaling."""
    gain_scale = scaling.storage / scaling.flow
    g1, g2, g3 = pid.as_array() * gain_scale
    ts = seconds_per_step * scaling.flow / scaling.storage
    theta_sum = g1 + g2 + g3

    labels = ["storage"]
    use_i = g2 != 0.0
    use_d = g3 != 0.0
    if use_i:
        labels.append("integrator")
    if use_d:
        labels.append("prev_error")
    n = len(labels)
    a = np.zeros((n, n))
    b = np.zeros((n, 2))
    c = np.zeros((2, n))
    d = np.zeros((2, 2))

    # s' = s + ts*q - ts*u, with u = theta_sum*(ref - s) + g2*I_prev - g3*e_prev
    a[0, 0] = 1.0 + ts * theta_sum
    b[0, 0] = -ts * theta_sum
    b[0, 1] = ts
    col = 1
    i_col = d_col = None
    if use_i:
        i_col = col
        a[0, i_col] = -ts * g2
        a[i_col, 0] = -1.0
        a[i_col, i_col] = 1.0
        b[i_col, 0] = 1.0
        col += 1
    if use_d:
        d_col = col
        a[0, d_col] = ts * g3
        a[d_col, 0] = -1.0
        b[d_col, 0] = 1.0

    c[0, 0] = 1.0  # storage output
    c[1, 0] = -theta_sum  # release decision output
    if use_i:
        c[1, i_col] = g2
    if use_d:
        c[1, d_col] = -g3
    d[1, 0] = theta_sum
    return StateSpaceModel(a=a, b=b, c=c, d=d, scaling=scaling, pid=pid,
                           seconds_per_step=seconds_per_step,
                           state_labels=tuple(labels))


def initial_state(model: StateSpaceModel, s0: float, integrator: float = 0.0,
                  prev_error: float = 0.0) -> np.ndarray:
    """Scaled state vector from physical storage and controller memory (m3)."""
    x = [s0 / model.scaling.storage]
    if "integrator" in model.state_labels:
        x.append(integrator / model.scaling.storage)
    if "prev_error" in model.state_labels:
        x.append(prev_error / model.scaling.storage)
    return np.array(x)


def predict(model: StateSpaceModel, x0: np.ndarray, s_ref, q_d) -> tuple[np.ndarray, np.ndarray]:
    """Roll the realization over a horizon; returns physical (s, u) series.

    ``s[k]`` is the storage at the start of step k (so ``s[0]`` restates the
    initial storage) and ``u[k]`` the release decision applied over step k.
    """
    s_ref = np.asarray(s_ref, dtype=float) / model.scaling.storage
    q_d = np.asarray(q_d, dtype=float) / model.scaling.flow
    if len(s_ref) != len(q_d) or len(s_ref) < 1:
        raise ConfigError("reference and inflow series must have equal length >= 1")
    n = len(s_ref)
    x = np.array(x0, dtype=float)
    if x.shape != (model.n_states,):
        raise ConfigError(f"state must have shape ({model.n_states},)")
    s_out = np.empty(n)
    u_out = np.empty(n)
    for k in range(n):
        inp = np.array([s_ref[k], q_d[k]])
        y = model.c @ x + model.d @ inp
        s_out[k] = y[0]
        u_out[k] = y[1]
        x = model.a @ x + model.b @ inp
    return s_out * model.scaling.storage, u_out * model.scaling.flow


def terminal_storage(model: StateSpaceModel, x0: np.ndarray, s_ref, q_d) -> float:
    """Physical storage after the last predicted step."""
    s_ref = np.asarray(s_ref, dtype=float) / model.scaling.storage
    q_d = np.asarray(q_d, dtype=float) / model.scaling.flow
    x = np.array(x0, dtype=float)
    for k in range(len(s_ref)):
        x = model.a @ x + model.b @ np.array([s_ref[k], q_d[k]])
    return float(x[0]) * model.scaling.storage


@dataclass
class InnerLoopDiagnostics:
    saturated_steps: int = 0
    negative_storage_steps: int = 0


class InnerLoopSimulator:
    """Stateful day-by-day simulation of the real (saturating) inner loop.

    Keeps the PID memory (integrator, previous error), the storage and the
    routing smoother state so the outer controller can interleave planning
    and single true steps. With anti-windup enabled the integrator freezes
    on steps where the release saturates.
    """

    def __init__(self, spec: ReservoirSpec, routing: RoutingModel, pid: PIDParams,
                 s0: float, anti_windup: bool = True):
        self.spec = spec
        self.routing = routing
        self.pid = pid
        self.anti_windup = anti_windup
        self.s = float(s0)
        self.integrator = 0.0
        self.prev_error = 0.0
        self.diagnostics = InnerLoopDiagnostics()
        self._total_flows: list[float] = []
        self._smoothed: float | None = None
        self._records: list[tuple] = []
        self._t = 0

    def step(self, s_ref: float, q_d: float, q_t: float, q_l: float) -> dict:
        e = s_ref - self.s
        integ = self.integrator + e
        u = (self.pid.theta1 * e + self.pid.theta2 * integ
             + self.pid.theta3 * (e - self.prev_error))
        lo, hi = release_bounds(self.spec, self.s, q_d)
        r = float(np.clip(u, lo, hi))
        saturated = r != u
        if saturated:
            self.diagnostics.saturated_steps += 1
        if not (self.anti_windup and saturated):
            self.integrator = integ
        self.prev_error = e

        self._total_flows.append(r + q_t + q_l)
        k = len(self._total_flows) - 1
        q_eff = self._total_flows[max(k - self.routing.lag, 0)]
        if self._smoothed is None:
            self._smoothed = q_eff
        else:
            a = self.routing.attenuation
            self._smoothed = a * self._smoothed + (1.0 - a) * q_eff
        h = float(self.routing.stage_level(self._smoothed))

        head = float(hydraulic_head(self.spec, self.s, r))
        energy = float(energy_production(self.spec, head, r))
        record = {"t": self._t, "s": self.s, "u": float(u), "r": r,
                  "q_d": q_d, "h_hanoi": h, "energy": energy}
        self._records.append((self._t, self.s, float(u), r, q_d, h, energy))
        self.s = self.s + (q_d - r) * self.spec.seconds_per_step
        if self.s < 0:
            self.diagnostics.negative_storage_steps += 1
        self._t += 1
        return record

    def trajectory(self) -> Trajectory:
        if not self._records:
            raise ValueError("no steps simulated yet")
        arr = np.array(self._records, dtype=float)
        return Trajectory(t=arr[:, 0], s=arr[:, 1], u=arr[:, 2], r=arr[:, 3],
                          q_d=arr[:, 4], h_hanoi=arr[:, 5], energy=arr[:, 6],
                          s_end=self.s, seconds_per_step=self.spec.seconds_per_step)


def simulate_inner_loop(spec: ReservoirSpec, routing: RoutingModel, pid: PIDParams,
                        s_ref, trace: HydrologyTrace, s0: float,
                        anti_windup: bool = True) -> tuple[Trajectory, InnerLoopDiagnostics]:
    """Run the real inner loop over a whole reference series."""
    s_ref = np.asarray(s_ref, dtype=float)
    if len(s_ref) != len(trace):
        raise ConfigError("reference series and trace must cover the same horizon")
    sim = InnerLoopSimulator(spec, routing, pid, s0, anti_windup=anti_windup)
    for t in range(len(trace)):
        sim.step(float(s_ref[t]), float(trace.q_d[t]), float(trace.q_t[t]),
                 float(trace.q_l[t]))
    return sim.trajectory(), sim.diagnostics
