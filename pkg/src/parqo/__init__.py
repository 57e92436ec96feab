"""Minimum-PAR solutions of underdetermined linear systems.

Forward-backward splitting on an lp-lq surrogate of the peak-to-average
power ratio, a Douglas-Rachford l-infinity baseline, and their use for
joint precoding and PAR reduction in a massive MU-MIMO-OFDM downlink.
"""
__version__ = "0.1.0"

from .errors import ConfigError, DomainError, ParqoError, SingularSystemError
from .metrics import (EmpiricalDistribution, ParReport, is_min_par, objective_f, par,
                      par_pq, par_report, percentile, pinc, tradeoff_constant)
from .solvers import (IterTrace, LinearSystem, SolverConfig, affine_project, grad_lplq,
                      probe_step_size, project_l1_ball, prox_linf, solve_drs_linf,
                      solve_fbs_lplq, solve_ls)

__all__ = [
    "ConfigError", "DomainError", "ParqoError", "SingularSystemError",
    "EmpiricalDistribution", "ParReport", "is_min_par", "objective_f", "par", "par_pq",
    "par_report", "percentile", "pinc", "tradeoff_constant",
    "IterTrace", "LinearSystem", "SolverConfig", "affine_project", "grad_lplq",
    "probe_step_size", "project_l1_ball", "prox_linf", "solve_drs_linf", "solve_fbs_lplq",
    "solve_ls",
]
