"""Bethe-approximation CSMA: one-shot intensities, Bethe utility maximisation,
an exact enumeration oracle and a continuous-time CSMA simulator."""
from .bas import bas_intensity, bas_with_margin
from .bethe import bethe_entropy, bethe_error_at, bethe_free_energy, bethe_gradient, domain_point
from .bum import (BumTrace, ProjectionSchedule, UtilitySpec, bum_recover_intensity, bum_run, grad_k_b,
                  hessian_check_k_b, hessian_k_b, k_b, k_b_optimum, lemma2_diagnostics, mu_weights, project_star)
from .errors import DomainError, InvariantViolation, OracleIntractableError
from .graph import (InterferenceGraph, ScheduleSet, enumerate_feasible_schedules, make_topology,
                    symmetric_capacity)
from .oracle import (ScheduleDistribution, gibbs_free_energy, service_rates, stationary_distribution,
                     verify_gibbs_variational)
from .sim import estimate_vs_oracle, run_baseline, simulate

__version__ = "0.1.0"
