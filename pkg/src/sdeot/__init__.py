"""Semidiscrete optimal transport: Brenier and entropic maps, and how fast the
entropic map converges to the Brenier map as the regularization vanishes."""

__version__ = "0.1.0"

from .eot_solver import eval_G, eval_G_jacobian, entropic_objective, solve_entropic, solve_entropic_path
from .experiments import (Problem, RateFit, clt_sim, constant_check, fit_rate, oracle_tanh,
                          oracle_tanh_limit, rate_sweep)
from .functionals import (TestField, dual_norm_lower_bound, l2_sq_distance, make_test_family,
                          pair_difference)
from .geometry import (LaguerreDiagram, PotentialVector, build_diagram, cell_mass, facet_integral,
                       level_set_integral, mass_jacobian)
from .maps import brenier_eval, delta, entropic_eval
from .measures import DiscreteMeasure, SourceMeasure, ValidationError, integrate, sample
from .sd_solver import SolveReport, semidual_objective, solve_semidual

__all__ = [
    "DiscreteMeasure", "LaguerreDiagram", "PotentialVector", "Problem", "RateFit", "SolveReport",
    "SourceMeasure", "TestField", "ValidationError", "brenier_eval", "build_diagram", "cell_mass",
    "clt_sim", "constant_check", "delta", "dual_norm_lower_bound", "entropic_eval",
    "entropic_objective", "eval_G", "eval_G_jacobian", "facet_integral", "fit_rate", "integrate",
    "l2_sq_distance", "level_set_integral", "make_test_family", "mass_jacobian", "oracle_tanh",
    "oracle_tanh_limit", "pair_difference", "rate_sweep", "sample", "semidual_objective",
    "solve_entropic", "solve_entropic_path", "solve_semidual",
]
