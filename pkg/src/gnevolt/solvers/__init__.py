from .admm import (AdmmConfig, admm_qupdate_per_bus, admm_residual_per_bus,
                   admm_thetaupdate_per_bus, admm_vupdate_per_bus, default_beta, local_rows,
                   run_admm, run_admm_compact)
from .baselines import (IterConfig, OptimumSolution, gradient_play_step_bound, run_extragradient,
                        run_gradient_play, solve_global_optimum)
from .common import sol_scalar, sol_vector
from .reference import ReferenceSolution, solve_reference_gne
from .theory import GapProbeSet, ParameterReport, ergodic_gap, theorem2_parameters

__all__ = [
    "AdmmConfig", "IterConfig", "OptimumSolution", "ReferenceSolution", "GapProbeSet",
    "ParameterReport", "admm_qupdate_per_bus", "admm_residual_per_bus",
    "admm_thetaupdate_per_bus", "admm_vupdate_per_bus", "default_beta", "ergodic_gap",
    "gradient_play_step_bound", "local_rows", "run_admm", "run_admm_compact",
    "run_extragradient", "run_gradient_play", "sol_scalar", "sol_vector",
    "solve_global_optimum", "solve_reference_gne", "theorem2_parameters",
]
