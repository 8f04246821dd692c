"""Moments, tails and finiteness of Student's t-statistic under arbitrary laws."""

from .classify import (ClassificationVerdict, Verdict, classify, classify_grid,
                       convergence_experiment, limit_moment, moment_via_survival)
from .common import INFINITE, BudgetExceeded, DivergentTarget, SpecError, is_infinite
from .dist import (Cauchy, Discrete, Distribution, Mixture, Normal, Pareto, PowerSingularity,
                   Uniform, check_prop4, concentration_profile, concentration_q,
                   concentration_Q, fit_lambda, from_dict, sample)
from .exact import (exact_condition_ii, exact_condition_iii, exact_R_n_delta,
                    exact_tmoment)
from .geom import interior_stationarity_check, lemma1_verify, lemma2_verify, u_n
from .mc import (estimate_moment, estimate_tail_index, near_degeneracy_probe,
                 simulate_tstat, subgaussian_probe, survival_curve)
from .selfnorm import TStatSummary, compute_stats, ustar_inverse_threshold, ustar_threshold

__version__ = "0.1.0"

__all__ = [
    "INFINITE", "BudgetExceeded", "Cauchy", "ClassificationVerdict", "Discrete",
    "Distribution", "DivergentTarget", "Mixture", "Normal", "Pareto", "PowerSingularity",
    "SpecError", "TStatSummary", "Uniform", "Verdict", "check_prop4", "classify",
    "classify_grid", "compute_stats", "concentration_profile", "concentration_q",
    "concentration_Q", "convergence_experiment", "estimate_moment", "estimate_tail_index",
    "exact_condition_ii", "exact_condition_iii", "exact_R_n_delta", "exact_tmoment",
    "fit_lambda", "from_dict", "interior_stationarity_check", "is_infinite",
    "lemma1_verify", "lemma2_verify", "limit_moment", "moment_via_survival",
    "near_degeneracy_probe", "sample", "simulate_tstat", "subgaussian_probe",
    "survival_curve", "u_n", "ustar_inverse_threshold", "ustar_threshold",
]
