"""Active-IRS aided wireless powered communication networks.

Simulation and optimization of the weighted sum throughput for the three
IRS beamforming setups (user-adaptive, uplink-adaptive, static) with an
experiment harness for Monte Carlo parameter sweeps.
"""

from .channels import ChannelRealization, FadingConfig, named_rng, path_loss, realize, sample_channels
from .derived import DerivedChannel, derive_channel, effective_channel
from .geometry import GeometryConfig, NodePositions, place_nodes
from .model import (FeasibilityReport, ReflectionPlan, ReflectionVector,
                    ResourceAllocation, check_feasibility, dl_amplify_power,
                    harvested_energy, harvested_energy_rate, throughput,
                    total_energy_consumption, ul_amplify_power, unit_power_sinr,
                    uplink_sinr, weighted_sum_throughput)
from .params import SystemParams, default_params
from .solvers import (FPState, Solution, SolverConfig,
                      closed_form_single_device_amplitudes, cophased_vector,
                      solve_passive_baseline, solve_scheme, solve_static,
                      solve_uplink_adaptive, solve_user_adaptive)
from .units import dbm_to_watts, watts_to_dbm

__version__ = "0.1.0"
