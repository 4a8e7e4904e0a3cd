"""Discrete-event CSMA/CA contention simulator with MAR-driven window control."""
from .analytics import (attempt_probability, beb_collision_fixed_point, chernoff_bound, cost_function,
                        optimal_mar, standard_error, steady_mar)
from .engine import ChannelState, ContractViolation, Event, EventKind, EventQueue, Medium, Topology, run_until
from .eventlog import EventLog
from .mac import PhyParams, Ppdu, Station, contention_interval
from .mar import InsufficientSamples, MarObserver
from .policy import (BladeParams, BladePolicy, DdaPolicy, EdcaAcParams, IdleSensePolicy, IeeeBebPolicy,
                     make_policy)
from .scenario import Scenario, ScenarioError, build_simulation, run, validate

__version__ = "0.1.0"
