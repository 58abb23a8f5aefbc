"""Virtual reference feedback tuning of the inner-loop PID.

Given one input/output record (u, s) of the plant, a reference model M for
the desired closed loop and the PID class

    C(z, theta) = theta1 + theta2 / (1 - z^-1) + theta3 * (1 - z^-1),

the gains are fitted in one shot: the virtual reference is recovered by
inverting M through the recorded output, the virtual error feeds the three
PID basis responses, and a linear least squares matches them to the recorded
input. When the ideal controller for (plant, M) lies in the PID class the
fit recovers it exactly (up to numerics).

Transfer functions are stored as coefficient sequences in z^-1 with an
implied one-day sampling period. Inversion of a model with relative degree
d is handled by advancing the signal d samples and trimming, which keeps
every filter causal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, IdentifiabilityError
from .reservoir import Trajectory


def _readonly(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LinearSISOModel:
    """Rational transfer function in z^-1: num/den with den[0] != 0."""

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "num", _readonly(np.atleast_1d(self.num)))
        object.__setattr__(self, "den", _readonly(np.atleast_1d(self.den)))
        if len(self.den) < 1 or self.den[0] == 0.0:
            raise ConfigError("denominator leading coefficient must be nonzero "
                              "(model would not be causal)")
        if not np.any(self.num != 0.0):
            raise ConfigError("numerator must not be identically zero")

    @property
    def relative_degree(self) -> int:
        return int(np.argmax(self.num != 0.0))

    def dc_gain(self) -> float:
        return float(np.sum(self.num) / np.sum(self.den))


def filter_series(model: LinearSISOModel, x) -> np.ndarray:
    """Causal difference-equation evaluation from zero initial conditions."""
    x = np.asarray(x, dtype=float)
    if x.size < 1:
        raise ValueError("empty input series")
    return lfilter(model.num, model.den, x)


def virtual_reference(model: LinearSISOModel, s_c) -> tuple[np.ndarray, int]:
    """Invert the reference model through an output record.

    Returns (r_bar, trim): ``r_bar[t]`` is the reference at time t and
    ``trim`` is the number of trailing samples lost to the model delay
    (relative degree). Re-filtering r_bar through the model reproduces the
    record after its leading ``trim`` transient samples.
    """
    s_c = np.asarray(s_c, dtype=float)
    delay = model.relative_degree
    if delay >= len(s_c):
        raise ValueError(f"series of length {len(s_c)} too short for delay {delay}")
    inverse = LinearSISOModel(num=model.den, den=model.num[delay:])
    r_bar = filter_series(inverse, s_c[delay:])
    return r_bar, delay


@dataclass(frozen=True)
class PIDParams:
    theta1: float
    theta2: float
    theta3: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ConfigError("PID gains must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.theta3])

    def numerator(self) -> np.ndarray:
        """Coefficients of C(z) over the common denominator (1 - z^-1)."""
        t1, t2, t3 = self.theta1, self.theta2, self.theta3
        return np.array([t1 + t2 + t3, -t1 - 2.0 * t3, t3])

    def response(self, e) -> np.ndarray:
        """Drive the PID with an error series from zero initial conditions."""
        e = np.asarray(e, dtype=float)
        return (self.theta1 * e
                + self.theta2 * np.cumsum(e)
                + self.theta3 * np.diff(e, prepend=0.0))


@dataclass(frozen=True)
class VirtualDataset:
    """Aligned series entering the one-shot fit (after delay trimming)."""

    u: np.ndarray
    s: np.ndarray
    r_bar: np.ndarray
    e_bar: np.ndarray

    def __post_init__(self):
        n = len(self.u)
        if not (len(self.s) == len(self.r_bar) == len(self.e_bar) == n):
            raise ConfigError("virtual dataset series must have equal length")


def build_virtual_dataset(u_c, s_c, model: LinearSISOModel) -> VirtualDataset:
    u_c = np.asarray(u_c, dtype=float)
    s_c = np.asarray(s_c, dtype=float)
    if len(u_c) != len(s_c):
        raise ValueError("u and s records must have equal length")
    r_bar, trim = virtual_reference(model, s_c)
    n = len(r_bar)
    s = s_c[:n]
    return VirtualDataset(u=u_c[:n], s=s, r_bar=r_bar, e_bar=r_bar - s)


def fit_pid(u_c, s_c, model: LinearSISOModel,
            prefilter: LinearSISOModel | None = None) -> PIDParams:
    """One-shot least-squares fit of the PID gains.

    The optional prefilter is applied to both the recorded input and the
    virtual error before building the regressors. Start-up transients of
    every filtered series are excluded from the criterion.
    """
    data = build_virtual_dataset(u_c, s_c, model)
    u = data.u
    e = data.e_bar
    if prefilter is not None:
        u = filter_series(prefilter, u)
        e = filter_series(prefilter, e)
    basis = np.column_stack([e, np.cumsum(e), np.diff(e, prepend=0.0)])
    skip = max(len(model.num), len(model.den))
    if prefilter is not None:
        skip = max(skip, len(prefilter.num), len(prefilter.den))
    if len(u) - skip < 8:
        raise ValueError("record too short for a meaningful fit")
    a = basis[skip:]
    b = u[skip:]
    _check_regressor_rank(a)
    theta, *_ = np.linalg.lstsq(a, b, rcond=None)
    return PIDParams(theta1=float(theta[0]), theta2=float(theta[1]), theta3=float(theta[2]))


_BASIS_NAMES = ("proportional", "integral", "derivative")


def _check_regressor_rank(a: np.ndarray) -> None:
    norms = np.linalg.norm(a, axis=0)
    scale = float(np.max(norms))
    if scale == 0.0:
        raise IdentifiabilityError("all regressors vanish: virtual error is identically zero")
    dead = [name for name, nrm in zip(_BASIS_NAMES, norms) if nrm <= 1e-12 * scale]
    if dead:
        raise IdentifiabilityError(
            f"rank-deficient regressor: {', '.join(dead)} basis response vanishes")
    normalized = a / norms
    if np.linalg.matrix_rank(normalized, tol=1e-10) < 3:
        corr = normalized.T @ normalized
        worst = (0, 1)
        for i in range(3):
            for j in range(i + 1, 3):
                if abs(corr[i, j]) > abs(corr[worst[0], worst[1]]):
                    worst = (i, j)
        raise IdentifiabilityError(
            "rank-deficient regressor: "
            f"{_BASIS_NAMES[worst[0]]} and {_BASIS_NAMES[worst[1]]} basis responses are collinear")


def mean_annual_cycle(traj: Trajectory, length: int | None = None,
                      period: int = 365) -> tuple[np.ndarray, np.ndarray]:
    """Day-of-year averages of (u, s) across the full years of a trajectory.

    Returns series of ``length`` days (default one period) built by tiling
    the periodic cycle. A trailing partial year is ignored.
    """
    n_years = len(traj) // period
    if n_years < 1:
        raise ValueError(f"trajectory spans {len(traj)} days; need >= {period}")
    u = np.asarray(traj.u[:n_years * period]).reshape(n_years, period).mean(axis=0)
    s = np.asarray(traj.s[:n_years * period]).reshape(n_years, period).mean(axis=0)
    if length is None:
        length = period
    idx = np.arange(length) % period
    return u[idx], s[idx]
