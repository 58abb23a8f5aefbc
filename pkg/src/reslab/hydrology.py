"""Synthetic daily inflows for the Da, Thao and Lo rivers.

Flows are lognormal with day-of-year mean/spread profiles, AR(1)
persistence of the log deviations and cross-river correlation of the
innovations (Cholesky factor of a 3x3 correlation matrix). The same model
also provides per-day scenario ensembles used by the stochastic dynamic
programming expectation, where the temporal correlation is dropped and each
day is sampled from its marginal.

The calendar is a fixed 365-day year; no leap days.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import IO

import numpy as np

from .errors import ConfigError, ParseError

DAYS_PER_YEAR = 365
RIVERS = ("da", "thao", "lo")
TRACE_COLUMNS = ("day", "q_d", "q_t", "q_l")


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class HydrologyTrace:
    """Daily mean flows (m3/s). Index t holds the flow over interval [t, t+1)."""

    q_d: np.ndarray
    q_t: np.ndarray
    q_l: np.ndarray
    start_day: int = 0

    def __post_init__(self):
        for name in ("q_d", "q_t", "q_l"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        n = len(self.q_d)
        if n < 1 or len(self.q_t) != n or len(self.q_l) != n:
            raise ConfigError("trace series must have equal length >= 1")
        for name in ("q_d", "q_t", "q_l"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
                raise ConfigError(f"trace {name} contains negative or non-finite flows")
        object.__setattr__(self, "start_day", int(self.start_day) % DAYS_PER_YEAR)

    def __len__(self) -> int:
        return len(self.q_d)

    def day_of_year(self, t: int) -> int:
        return (self.start_day + t) % DAYS_PER_YEAR


@dataclass(frozen=True)
class InflowModel:
    """Seasonal lognormal AR(1) generator for the three rivers.

    ``mu`` and ``sigma`` are (3, 365) arrays of log-space mean and spread per
    river (row order Da, Thao, Lo). ``rho_time`` is the lag-1 coefficient of
    the log deviations, shared by the three rivers. ``spatial_corr`` is the
    3x3 innovation correlation matrix.
    """

    mu: np.ndarray
    sigma: np.ndarray
    rho_time: float
    spatial_corr: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "mu", _readonly(self.mu))
        object.__setattr__(self, "sigma", _readonly(self.sigma))
        object.__setattr__(self, "spatial_corr", _readonly(self.spatial_corr))
        if self.mu.shape != (3, DAYS_PER_YEAR) or self.sigma.shape != (3, DAYS_PER_YEAR):
            raise ConfigError("mu and sigma must have shape (3, 365)")
        if np.any(self.sigma < 0.0):
            raise ConfigError("sigma must be nonnegative")
        if not 0.0 <= self.rho_time < 1.0:
            raise ConfigError("rho_time must lie in [0, 1)")
        r = self.spatial_corr
        if r.shape != (3, 3) or not np.allclose(r, r.T, atol=1e-12):
            raise ConfigError("spatial correlation matrix must be symmetric 3x3")
        if not np.allclose(np.diag(r), 1.0, atol=1e-12):
            raise ConfigError("spatial correlation matrix must have unit diagonal")
        if np.min(np.linalg.eigvalsh(r)) <= 0.0:
            raise ConfigError("spatial correlation matrix must be positive definite")

    def innovation_cholesky(self) -> np.ndarray:
        return np.linalg.cholesky(self.spatial_corr)


@dataclass(frozen=True)
class DisturbanceEnsemble:
    """Per day-of-year scenario fans for the stage expectation.

    ``flows`` has shape (365, K, 3) with river order (Da, Thao, Lo) and
    ``weights`` shape (365, K), normalized per day.
    """

    flows: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "flows", _readonly(self.flows))
        object.__setattr__(self, "weights", _readonly(self.weights))
        if self.flows.ndim != 3 or self.flows.shape[0] != DAYS_PER_YEAR or self.flows.shape[2] != 3:
            raise ConfigError("ensemble flows must have shape (365, K, 3)")
        if self.weights.shape != self.flows.shape[:2]:
            raise ConfigError("ensemble weights must have shape (365, K)")
        if self.flows.shape[1] < 1:
            raise ConfigError("ensemble needs K >= 1 scenarios per day")
        if np.any(self.weights < 0.0):
            raise ConfigError("ensemble weights must be nonnegative")
        if np.max(np.abs(self.weights.sum(axis=1) - 1.0)) > 1e-12:
            raise ConfigError("ensemble weights must sum to 1 per day")

    @property
    def scenarios_per_day(self) -> int:
        return self.flows.shape[1]


def generate_trace(model: InflowModel, n_days: int, start_day: int = 0) -> HydrologyTrace:
    """Sample ``n_days`` of correlated daily flows.

    Pure function of (model, n_days, start_day): the generator stream is
    derived from ``model.seed`` alone, so identical inputs give bit-identical
    traces.
    """
    if n_days < 1:
        raise ConfigError("n_days must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(model.seed, spawn_key=(0,)))
    chol = model.innovation_cholesky()
    days = (start_day + np.arange(n_days)) % DAYS_PER_YEAR
    sig = model.sigma[:, days].T  # (n_days, 3)
    eps = rng.standard_normal((n_days, 3)) @ chol.T
    z = np.empty((n_days, 3))
    z[0] = sig[0] * eps[0]
    rho = model.rho_time
    scale = np.sqrt(1.0 - rho * rho)
    for t in range(1, n_days):
        z[t] = rho * z[t - 1] + scale * sig[t] * eps[t]
    q = np.exp(model.mu[:, days].T + z)
    return HydrologyTrace(q_d=q[:, 0], q_t=q[:, 1], q_l=q[:, 2], start_day=start_day)


def build_ensemble(model: InflowModel, scenarios_per_day: int) -> DisturbanceEnsemble:
    """Equally weighted marginal samples for every day of the year.

    The AR(1) persistence is intentionally dropped: the stage expectation
    conditions only on the day of year, so each day is sampled from its
    lognormal marginal.
    """
    if scenarios_per_day < 1:
        raise ConfigError("scenarios_per_day must be >= 1")
    k = scenarios_per_day
    rng = np.random.default_rng(np.random.SeedSequence(model.seed, spawn_key=(1,)))
    chol = model.innovation_cholesky()
    eps = rng.standard_normal((DAYS_PER_YEAR, k, 3)) @ chol.T
    mu = model.mu.T[:, None, :]  # (365, 1, 3)
    sigma = model.sigma.T[:, None, :]
    flows = np.exp(mu + sigma * eps)
    weights = np.full((DAYS_PER_YEAR, k), 1.0 / k)
    return DisturbanceEnsemble(flows=flows, weights=weights)


def trace_from_ensemble(ensemble: DisturbanceEnsemble, scenario: int, n_days: int) -> HydrologyTrace:
    """Tile one scenario column into a periodic trace (used for K=1 cross-checks)."""
    days = np.arange(n_days) % DAYS_PER_YEAR
    flows = ensemble.flows[days, scenario, :]
    return HydrologyTrace(q_d=flows[:, 0], q_t=flows[:, 1], q_l=flows[:, 2], start_day=0)


def save_trace(trace: HydrologyTrace, dest: str | Path | IO[str]) -> None:
    """Write the CSV form: header ``day,q_d,q_t,q_l``, flows in m3/s."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(TRACE_COLUMNS)
    for i in range(len(trace)):
        writer.writerow([trace.start_day + i,
                         f"{trace.q_d[i]:.10g}", f"{trace.q_t[i]:.10g}", f"{trace.q_l[i]:.10g}"])
    text = buf.getvalue()
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        from .fileio import atomic_write_text

        atomic_write_text(dest, text)


def load_trace(source: str | Path | IO[str]) -> HydrologyTrace:
    """Parse a trace CSV, rejecting malformed rows with their line number."""
    if hasattr(source, "read"):
        return _parse_trace(source)
    with open(source, newline="", encoding="utf-8") as fh:
        return _parse_trace(fh)


def _parse_trace(stream: IO[str]) -> HydrologyTrace:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("line 1: empty trace file") from None
    if [h.strip() for h in header] != list(TRACE_COLUMNS):
        raise ParseError(f"line 1: expected header {','.join(TRACE_COLUMNS)}, got {','.join(header)}")
    days: list[int] = []
    flows: list[tuple[float, float, float]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ParseError(f"line {lineno}: expected 4 columns, got {len(row)}")
        try:
            day = int(row[0])
        except ValueError:
            raise ParseError(f"line {lineno}: day must be an integer, got {row[0]!r}") from None
        values = []
        for col, cell in zip(TRACE_COLUMNS[1:], row[1:]):
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"line {lineno}: {col} must be numeric, got {cell!r}") from None
            if not np.isfinite(value) or value < 0.0:
                raise ParseError(f"line {lineno}: {col} must be a finite nonnegative flow, got {cell}")
            values.append(value)
        if days and day != days[-1] + 1:
            raise ParseError(f"line {lineno}: day must increase by 1 (got {day} after {days[-1]})")
        days.append(day)
        flows.append((values[0], values[1], values[2]))
    if not flows:
        raise ParseError("line 2: trace has no data rows")
    arr = np.array(flows)
    return HydrologyTrace(q_d=arr[:, 0], q_t=arr[:, 1], q_l=arr[:, 2], start_day=days[0])
