"""Reservoir operation laboratory.

Three control strategies for one hydropower reservoir, built to be
cross-checked against each other: offline dynamic programming
(deterministic and stochastic), a data-driven PID inner loop tuned by
virtual reference feedback, and an economic model-predictive outer loop
acting as a reference governor. A sweep harness scores every strategy on
the hydropower/flood trade-off and assembles Pareto fronts.
"""

__version__ = "0.1.0"

from .hydrology import (DisturbanceEnsemble, HydrologyTrace, InflowModel,
                        build_ensemble, generate_trace, load_trace, save_trace)
from .objectives import (ObjectivesReport, flood_objective, hydropower_objective,
                         pareto_filter, report_objectives, scalarize)
from .reservoir import (Curve, ReleaseTable, ReservoirSpec, ReservoirState,
                        Trajectory, apply_release, energy_production,
                        hydraulic_head, release_bounds, step)
from .routing import RoutingModel, hanoi_level
from .dp import (BellmanTable, GridSpec, Policy, extract_policy, simulate_policy,
                 solve_ddp, solve_sdp)
from .vrft import (LinearSISOModel, PIDParams, VirtualDataset, filter_series,
                   fit_pid, mean_annual_cycle, virtual_reference)
from .innerloop import (InnerLoopConfig, LoopScaling, StateSpaceModel,
                        initial_state, linearized_inner_loop, predict,
                        simulate_inner_loop)
from .empc import EmpcConfig, EmpcStepResult, SolverOptions, run_receding_horizon, solve_step
from .config import default_config, load_config

__all__ = [name for name in dir() if not name.startswith("_")]
