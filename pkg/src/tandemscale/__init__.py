"""Speed scaling for tandem servers: online policies, offline bounds, audits."""

import sys

__version__ = "0.1.0"

from .power import PowerFunction, PowerDomainError, SpeedCapError, tangent_gap
from .workload import (Trace, TraceFormatError, gen_batch, gen_poisson,
                       gen_trickle_then_burst, emit, parse)
from .engine import (CostReport, InvariantError, PolicyContractError, SimulationError,
                     Trajectory, cost, simulate)
from .policies import (AutonomousPolicy, ProposedPolicy, ReplicationPolicy, SpeedPolicy,
                       make_policy, proposed_speeds)
from .offline import (OptSchedule, closed_form_lb, empirical_ratios, enhanced_opt,
                      worst_case_ratio_bound)
from .potential import audit_all, audit_drift, audit_integrated, audit_jumps, potential
from .stochastic import (ConfigError, Layer, NetworkConfig, StochasticReport, gated_speed,
                         layer_cost_closed_form, lb1, lb2, ratio_certificate,
                         simulate_network)

__all__ = [name for name, obj in list(globals().items())
           if not name.startswith("_") and not isinstance(obj, type(sys))]
