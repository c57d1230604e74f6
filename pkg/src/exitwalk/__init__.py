"""Monte Carlo laboratory for random-walk ball-exit times in finite-dimensional lp spaces."""
__version__ = "0.1.0"

from ._backend import BACKEND
from .distributions import (DiscreteRadial, FixedSubsetRademacher, GaussianAssociate,
                            GaussianSteps, PointMass, RandomSubsetRademacher, Shifted,
                            StepDistribution, TypeWitness, analytic_moments,
                            distribution_from_dict, gaussian_associate, sample, truncate_step)
from .functionals import (PruittFunctionals, check_h_limit, check_hd_bounds, check_q2_identity,
                          functionals, functionals_analytic, functionals_mc, geometric_grid,
                          truncated_moment_identity)
from .harness import (BoundCheckResult, ScalingReport, run_gaussian_bounds,
                      run_lemma_implication_checks, run_pruitt_suite, run_scaling_experiment,
                      run_type_witness_convergence)
from .rng import RngStream
from .simulator import (ExitSample, ExitTimeEstimate, SnStats, estimate_exit_time,
                        exit_equals_truncated_exit, simulate_exit, sn_statistics)
from .space import SpaceSpec, add_assign, lp_norm

__all__ = [
    "BACKEND", "BoundCheckResult", "DiscreteRadial", "ExitSample", "ExitTimeEstimate",
    "FixedSubsetRademacher", "GaussianAssociate", "GaussianSteps", "PointMass",
    "PruittFunctionals", "RandomSubsetRademacher", "RngStream", "ScalingReport", "Shifted",
    "SnStats", "SpaceSpec", "StepDistribution", "TypeWitness", "add_assign", "analytic_moments",
    "check_h_limit", "check_hd_bounds", "check_q2_identity", "distribution_from_dict",
    "estimate_exit_time", "exit_equals_truncated_exit", "functionals", "functionals_analytic",
    "functionals_mc", "gaussian_associate", "geometric_grid", "lp_norm", "run_gaussian_bounds",
    "run_lemma_implication_checks", "run_pruitt_suite", "run_scaling_experiment",
    "run_type_witness_convergence", "sample", "simulate_exit", "sn_statistics",
    "truncate_step", "truncated_moment_identity",
]
