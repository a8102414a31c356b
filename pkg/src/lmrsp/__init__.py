"""Simulation and analysis of a linear-memory randomized link scheduler over time-varying channels."""
from ._backend import BACKEND
from .channel import ChannelModel, mixing_horizon, stationary_distribution, steady_state_prob
from .capacity import (CapacityCertificate, Outside, boundary_point, capacity_membership,
                       estimate_psi_phi, estimate_theta, theta_min)
from .config import ExperimentConfig, StabilityThresholds, load_config
from .engine import System, simulate
from .experiment import average_delay, detect_stability, run_simulation, sweep_load
from .policy import LmrspState, PolicyParams, f_update_prob, gmwm_solve, lmrsp_step, phi
from .queueing import ArrivalModel, queue_step
from .rates import nu, rate_vector
from .topology import InterferenceModel, NetworkGraph, enumerate_schedules, is_valid_schedule

__version__ = "0.1.0"
