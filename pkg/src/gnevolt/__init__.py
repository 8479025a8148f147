"""Distributed generalized-Nash-equilibrium learning for voltage control on
radial feeders whose buses talk only to in-area neighbors."""

from .comms import (CommGraph, LocalityAudit, UpdateSchedule, async_tick, build_comm_graph,
                    exchange_round)
from .costs import CostModel, LogCoshCost, QuadraticCost, QuarticCost
from .errors import (ConfigurationError, DivergenceError, DomainError, GneVoltError,
                     LocalityViolation, NonUniqueEquilibrium, ScenarioError, TopologyError,
                     UnsupportedFeatureError)
from .game import (BlockDecomposition, CommPartition, KKTCertificate, PrimalDualPoint, VarLimits,
                   area_payoff, decompose, ec_residual, f_mapping, global_objective,
                   natural_residual, phi, phi_jacobian_symmetric_part_minimum)
from .grid import (Edge, FeederTopology, GridModel, build_reduced_laplacian,
                   check_positive_definite, default_operating_point, ieee13_scenario,
                   measure_voltage)
from .scenario import Scenario, load_bundled, load_scenario, parse_scenario

__version__ = "0.1.0"
