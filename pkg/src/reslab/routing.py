"""Downstream routing surrogate: release plus tributaries to the Hanoi level.

The trained flow-routing model the operators use is not available; this
surrogate keeps its qualitative structure: a routing delay of ``lag`` days,
exponential attenuation with coefficient ``attenuation`` and a monotone
power-law rating curve mapping smoothed total flow (m3/s) to a stage (cm).

``DownstreamModel`` is the seam a learned model can be plugged into: it only
needs ``level_series`` (history-based) and ``stage_level`` (memoryless stage
approximation used inside one-step costs).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, MissingHistoryError


@runtime_checkable
class DownstreamModel(Protocol):
    def level_series(self, r, q_t, q_l) -> np.ndarray: ...

    def stage_level(self, total_flow): ...


@dataclass(frozen=True)
class RoutingModel:
    """Lagged, smoothed power-law rating curve."""

    lag: int = 1
    attenuation: float = 0.35
    rating_scale: float = 0.02
    rating_exponent: float = 1.1

    def __post_init__(self):
        if self.lag < 0:
            raise ConfigError("routing lag must be >= 0")
        if not 0.0 <= self.attenuation < 1.0:
            raise ConfigError("attenuation must lie in [0, 1)")
        if self.rating_scale <= 0 or self.rating_exponent <= 0:
            raise ConfigError("rating curve parameters must be positive")

    def stage_level(self, total_flow):
        """Memoryless stage: rating curve applied to an instantaneous flow."""
        q = np.maximum(np.asarray(total_flow, dtype=float), 0.0)
        return self.rating_scale * np.power(q, self.rating_exponent)

    def level_series(self, r, q_t, q_l) -> np.ndarray:
        """Level at every step of aligned flow histories.

        Flows at index k describe interval [k, k+1); the returned level at
        index k is driven by the flows at index k - lag, clamped at the
        history start so closed-loop runs have a level from day one.
        """
        r = np.asarray(r, dtype=float)
        total = r + np.asarray(q_t, dtype=float) + np.asarray(q_l, dtype=float)
        if len(total) < 1:
            raise MissingHistoryError("empty flow history")
        idx = np.maximum(np.arange(len(total)) - self.lag, 0)
        q = total[idx]
        smoothed = self._smooth(q)
        return self.stage_level(smoothed)

    def _smooth(self, q: np.ndarray) -> np.ndarray:
        a = self.attenuation
        if a == 0.0:
            return q
        # y[k] = a*y[k-1] + (1-a)*q[k], initialized at y[0] = q[0]
        y, _ = lfilter([1.0 - a], [1.0, -a], q, zi=np.array([a * q[0]]))
        return y


def hanoi_level(model: RoutingModel, r, q_t, q_l, t: int) -> float:
    """Level (cm) at index ``t`` given flow histories starting at index 0.

    Requires history back to ``t - lag``; the smoothing recursion runs from
    the start of the provided histories.
    """
    r = np.asarray(r, dtype=float)
    if not (len(r) == len(np.asarray(q_t)) == len(np.asarray(q_l))):
        raise MissingHistoryError("flow histories must have equal length")
    if t < model.lag:
        raise MissingHistoryError(
            f"level at t={t} needs flows back to t-lag={t - model.lag}; history starts at 0")
    if t >= len(r):
        raise MissingHistoryError(f"t={t} beyond history of length {len(r)}")
    return float(model.level_series(r, q_t, q_l)[t])


def calibrate_rating_scale(model: RoutingModel, trace, threshold: float,
                           target_days_per_year: float) -> float:
    """Rating scale such that run-of-river passthrough exceeds ``threshold``
    on ``target_days_per_year`` days per year on average.

    Passthrough means the reservoir releases its inflow unchanged, so the
    level is driven by the natural total flow. Returns the calibrated scale;
    the other routing parameters are taken from ``model``.
    """
    if target_days_per_year <= 0:
        raise ConfigError("target_days_per_year must be > 0")
    probe = RoutingModel(lag=model.lag, attenuation=model.attenuation,
                         rating_scale=1.0, rating_exponent=model.rating_exponent)
    base = probe.level_series(trace.q_d, trace.q_t, trace.q_l)
    years = len(base) / 365.0
    k = int(round(target_days_per_year * years))
    if k < 1 or k > len(base):
        raise ConfigError("target exceedance count outside the trace length")
    # The k-th largest base level must sit exactly at the threshold.
    kth = np.sort(base)[-k]
    if kth <= 0:
        raise ConfigError("trace flows too small to calibrate a positive scale")
    return float(threshold / kth)
